"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``DDFREQ_PURE_PYTHON=1`` to force the fallback.
"""
import os

NAME = "python"

if os.environ.get("DDFREQ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import rk4_interval, secular_root  # noqa: F401
        NAME = "cython"
    except ImportError:  # extension not built
        pass

if NAME == "python":
    from ._kernels_py import rk4_interval, secular_root  # noqa: F401
