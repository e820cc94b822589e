"""Kernel backend selection.

The hot loops in :mod:`trunc_ising._kernels` are compiled with numba when
available. Set ``TRUNC_ISING_BACKEND=numpy`` to force the plain-Python/numpy
fallback, or ``TRUNC_ISING_BACKEND=numba`` to fail loudly if numba cannot be
imported. Unset, the backend defaults to numba when importable.

The two backends agree: chain trajectories, occupation codes, and estimates
are bit-identical because the fallback runs the same scalar code the compiler
sees; the vectorized enumeration path sums energies in a different order, so
those agree to floating-point rounding (checked in the test suite).
"""

import os

_env = os.environ.get("TRUNC_ISING_BACKEND", "").strip().lower()
if _env not in ("", "numba", "numpy"):
    raise ValueError(
        f"TRUNC_ISING_BACKEND must be 'numba' or 'numpy', got {_env!r}"
    )

if _env == "numpy":
    USE_NUMBA = False
elif _env == "numba":
    import numba  # noqa: F401 -- explicit request: raise if missing

    USE_NUMBA = True
else:
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    from numba import njit

    def jit(fn):
        """Compile a scalar kernel (cached, GIL released)."""
        return njit(cache=True, nogil=True)(fn)

else:

    def jit(fn):
        """Fallback: run the kernel as plain Python."""
        return fn
