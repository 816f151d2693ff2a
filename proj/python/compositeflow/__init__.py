"""Linearized proximal ADMM algorithms, their continuous-time limits, and the
analysis harness."""

try:
    from compositeflow._core import *  # noqa: F401,F403  installed layout
except ImportError:  # in-tree build: the module sits next to the build dir
    from _core import *  # noqa: F401,F403

__version__ = "0.1.0"
