"""Hot loops for applying local unitaries to dense 2^n-row matrices.

Two interchangeable backends:

* ``numba``: an ``@njit`` gather/multiply/scatter loop over rows.
* ``numpy``: reshape to a rank-(n+1) tensor and contract with ``tensordot``.

The numba path is used when numba imports and ``PFLATTICE_DISABLE_NUMBA`` is
unset (or "0"). Set ``PFLATTICE_DISABLE_NUMBA=1`` to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE_ENV = "PFLATTICE_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_DISABLE_ENV, "0").strip().lower() in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by environment")
    from numba import njit
except ImportError:
    njit = None

HAVE_NUMBA = njit is not None
BACKEND = "numba" if HAVE_NUMBA else "numpy"


def window_offsets(sites, n: int) -> np.ndarray:
    """Row-index offsets of the 2^w local basis states on ``sites``.

    Sites are 1-indexed with site 1 the most significant bit; the first
    entry of ``sites`` is the most significant local bit.
    """
    w = len(sites)
    offs = np.zeros(1 << w, dtype=np.int64)
    for a in range(1 << w):
        v = 0
        for pos, q in enumerate(sites):
            if (a >> (w - 1 - pos)) & 1:
                v |= 1 << (n - q)
        offs[a] = v
    return offs


def window_bases(sites, n: int) -> np.ndarray:
    """All row indices whose bits on ``sites`` are zero, ascending."""
    mask = 0
    for q in sites:
        mask |= 1 << (n - q)
    idx = np.arange(1 << n, dtype=np.int64)
    return idx[(idx & mask) == 0]


def _apply_local_numpy(mat, gate, sites, n):
    w = len(sites)
    m = mat.shape[1]
    axes = [q - 1 for q in sites]
    tens = mat.reshape((2,) * n + (m,))
    g = gate.reshape((2,) * (2 * w))
    out = np.tensordot(g, tens, axes=(list(range(w, 2 * w)), axes))
    # tensordot puts the gate's output axes first; move them back in place.
    out = np.moveaxis(out, list(range(w)), axes)
    return np.ascontiguousarray(out.reshape(mat.shape))


if HAVE_NUMBA:

    @njit(cache=True)
    def _apply_local_loop(mat, gate, offsets, bases):
        d = offsets.shape[0]
        m = mat.shape[1]
        buf = np.empty((d, m), dtype=np.complex128)
        for b in range(bases.shape[0]):
            base = bases[b]
            for k in range(d):
                row = base + offsets[k]
                for c in range(m):
                    buf[k, c] = mat[row, c]
            for a in range(d):
                row = base + offsets[a]
                for c in range(m):
                    mat[row, c] = 0j
                for k in range(d):
                    g = gate[a, k]
                    if g != 0j:
                        for c in range(m):
                            mat[row, c] += g * buf[k, c]


def apply_local(mat: np.ndarray, gate: np.ndarray, sites, n: int, backend: str | None = None) -> np.ndarray:
    """Return ``G_sites @ mat`` where ``G_sites`` embeds ``gate`` on ``sites``.

    ``mat`` has 2^n rows and any number of columns. The numba backend
    updates ``mat`` in place and returns it; the numpy backend returns a
    new array.
    """
    backend = backend or BACKEND
    gate = np.ascontiguousarray(gate, dtype=np.complex128)
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but unavailable")
        if mat.dtype != np.complex128 or not mat.flags.c_contiguous:
            mat = np.ascontiguousarray(mat, dtype=np.complex128)
        _apply_local_loop(mat, gate, window_offsets(sites, n), window_bases(sites, n))
        return mat
    if backend == "numpy":
        return _apply_local_numpy(np.asarray(mat, dtype=np.complex128), gate, sites, n)
    raise ValueError(f"unknown backend {backend!r}")
