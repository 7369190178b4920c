"""Dense complex operators on 2^n-dimensional qubit spaces.

Operators are plain ``complex128`` numpy arrays. Qubit sites are 1-indexed
and site 1 is the leftmost tensor factor (most significant bit).
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_MAX_QUBITS = 12
HARD_MAX_QUBITS = 14
SVD_MAX_DIM = 256
HERMITIAN_TOL = 1e-12

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class OperatorError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


def max_qubits() -> int:
    """Size cap in qubits; ``PFLATTICE_MAX_QUBITS`` opts in up to 14."""
    raw = os.environ.get("PFLATTICE_MAX_QUBITS")
    if not raw:
        return DEFAULT_MAX_QUBITS
    cap = int(raw)
    if not 1 <= cap <= HARD_MAX_QUBITS:
        raise OperatorError(f"PFLATTICE_MAX_QUBITS must be in [1, {HARD_MAX_QUBITS}]")
    return cap


def check_qubits(n: int, cap: int | None = None) -> None:
    cap = max_qubits() if cap is None else cap
    if cap > HARD_MAX_QUBITS:
        raise OperatorError(f"qubit cap {cap} exceeds hard limit {HARD_MAX_QUBITS}")
    if not 1 <= n <= cap:
        raise OperatorError(f"n={n} outside supported range [1, {cap}]")


def num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise OperatorError(f"dimension {dim} is not a power of two")
    return n


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    # Frobenius norm bounds the spectral norm from above.
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.linalg.norm(a - a.conj().T) <= tol


def _require_hermitian(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise OperatorError(f"expected a square matrix, got shape {a.shape}")
    if not is_hermitian(a):
        raise OperatorError("operator is not Hermitian within 1e-12")
    return a


def window_sites(start: int, width: int, n: int, wrap: bool = False) -> tuple[int, ...]:
    """Ordered 1-indexed sites of a width-``width`` window starting at ``start``."""
    if width < 1 or not 1 <= start <= n:
        raise OperatorError(f"window start={start}, width={width} invalid for n={n}")
    if start + width <= n + 1:
        return tuple(range(start, start + width))
    if not wrap:
        raise OperatorError(
            f"window [{start}, {start + width - 1}] exceeds n={n}; pass wrap=True for a boundary term"
        )
    if width > n:
        raise OperatorError(f"window width {width} exceeds n={n}")
    return tuple((start - 1 + i) % n + 1 for i in range(width))


def embed_sites(local: np.ndarray, sites, n: int) -> np.ndarray:
    """Embed ``local`` acting on the ordered ``sites`` into the 2^n space."""
    local = np.asarray(local, dtype=np.complex128)
    w = len(sites)
    if local.shape != (1 << w, 1 << w):
        raise OperatorError(f"local operator shape {local.shape} does not match {w} sites")
    if len(set(sites)) != w or min(sites) < 1 or max(sites) > n:
        raise OperatorError(f"invalid sites {sites} for n={n}")
    lo = min(sites)
    if tuple(sites) == tuple(range(lo, lo + w)):
        return np.kron(np.kron(np.eye(1 << (lo - 1)), local), np.eye(1 << (n - lo - w + 1)))
    # Non-contiguous or reordered sites (periodic wrap): permute tensor axes.
    others = [q for q in range(1, n + 1) if q not in sites]
    full = np.kron(local, np.eye(1 << (n - w))).reshape((2,) * (2 * n))
    order = list(sites) + others
    perm = [order.index(q) for q in range(1, n + 1)]
    full = full.transpose(perm + [n + p for p in perm])
    return np.ascontiguousarray(full.reshape(1 << n, 1 << n))


def embed_local(local: np.ndarray, start: int, n: int, *, wrap: bool = False) -> np.ndarray:
    """Return I ⊗ ... ⊗ local ⊗ ... ⊗ I with ``local`` on sites start, start+1, ...

    ``wrap=True`` allows the window to run past site n back to site 1, as for
    the boundary term of a periodic chain.
    """
    local = _require_hermitian(local)
    w = num_qubits(local.shape[0])
    check_qubits(n)
    return embed_sites(local, window_sites(start, w, n, wrap), n)


def herm_expm(a: np.ndarray, t: float, sign: int = 1) -> np.ndarray:
    """exp(-i * sign * t * A) for Hermitian A, via eigendecomposition."""
    if sign not in (1, -1):
        raise OperatorError("sign must be +1 or -1")
    a = _require_hermitian(a)
    if t == 0:
        return np.eye(a.shape[0], dtype=np.complex128)
    return expm_from_eigh(*eigh(a), sign * t)


def eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc


def expm_from_eigh(evals: np.ndarray, evecs: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t A) from a precomputed eigendecomposition of A."""
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise OperatorError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def spectral_norm(
    a: np.ndarray,
    *,
    svd_max_dim: int = SVD_MAX_DIM,
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> float:
    """Largest singular value.

    Full SVD up to ``svd_max_dim``; above that, power iteration on A†A from
    the normalized all-ones vector. Raises ConvergenceError (carrying the
    partial estimate) when the iteration cap is hit.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise OperatorError("spectral_norm expects a matrix")
    if a.size == 0:
        return 0.0
    if max(a.shape) <= svd_max_dim:
        try:
            return float(np.linalg.svd(a, compute_uv=False)[0])
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD failed: {exc}") from exc
    return _power_norm(a, tol, max_iter)


def _power_norm(a: np.ndarray, tol: float, max_iter: int) -> float:
    ah = a.conj().T
    x = np.full(a.shape[1], 1.0 / np.sqrt(a.shape[1]), dtype=np.result_type(a.dtype, np.complex128))
    lam = 0.0
    for _ in range(max_iter):
        y = a @ x
        lam_new = float(np.vdot(y, y).real)
        z = ah @ y
        zn = np.linalg.norm(z)
        if zn == 0.0:
            # x lies in the kernel; zero only if A itself vanishes.
            return 0.0 if not np.any(a) else _restart_norm(a, tol, max_iter)
        x = z / zn
        if abs(lam_new - lam) <= tol * lam_new:
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", estimate=float(np.sqrt(lam))
    )


def _restart_norm(a, tol, max_iter):
    # Deterministic fallback start vector for the rare all-ones-in-kernel case.
    d = a.shape[1]
    x = np.cos(np.arange(d) * 0.7071) + 0j
    x /= np.linalg.norm(x)
    lam = 0.0
    ah = a.conj().T
    for _ in range(max_iter):
        y = a @ x
        lam_new = float(np.vdot(y, y).real)
        z = ah @ y
        zn = np.linalg.norm(z)
        if zn == 0.0:
            raise ConvergenceError("power iteration collapsed to the kernel", estimate=0.0)
        x = z / zn
        if abs(lam_new - lam) <= tol * lam_new:
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise ConvergenceError("power iteration did not converge", estimate=float(np.sqrt(lam)))


def embed_sites_sparse(local: np.ndarray, sites, n: int):
    """Sparse CSR embedding of ``local`` on ``sites`` (same layout as embed_sites)."""
    from scipy import sparse

    from ._kernels import window_bases, window_offsets

    local = np.asarray(local, dtype=np.complex128)
    offs = window_offsets(sites, n)
    bases = window_bases(sites, n)
    a_idx, b_idx = np.nonzero(local)
    rows = (bases[None, :] + offs[a_idx][:, None]).ravel()
    cols = (bases[None, :] + offs[b_idx][:, None]).ravel()
    data = np.repeat(local[a_idx, b_idx], bases.size)
    dim = 1 << n
    return sparse.csr_matrix((data, (rows, cols)), shape=(dim, dim))
