"""One-dimensional lattice Hamiltonians and their commuting-layer groupings."""

from __future__ import annotations

import builtins
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import operators as ops
from .rng import SplitMix64

OPEN = "open"
PERIODIC = "periodic"
NORM_TOL = 1e-12


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatticeTerm:
    """A Hermitian operator on an ordered window of 1-indexed sites."""

    sites: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sites", tuple(int(q) for q in self.sites))
        if m.shape != (1 << len(self.sites),) * 2:
            raise LatticeError(f"matrix shape {m.shape} does not fit sites {self.sites}")
        if not ops.is_hermitian(m):
            raise LatticeError(f"term on sites {self.sites} is not Hermitian within 1e-12")

    @property
    def start(self) -> int:
        return self.sites[0]

    @property
    def width(self) -> int:
        return len(self.sites)

    @property
    def wraps(self) -> bool:
        return self.sites != tuple(range(self.start, self.start + self.width))

    def overlaps(self, other: "LatticeTerm") -> bool:
        return bool(set(self.sites) & set(other.sites))

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        return ops.eigh(self.matrix)

    @cached_property
    def norm(self) -> float:
        return ops.spectral_norm(self.matrix)

    def exp(self, t: float) -> np.ndarray:
        """exp(-i t H_term) on the local window."""
        return ops.expm_from_eigh(*self.eig, t)

    def embedded(self, n: int) -> np.ndarray:
        return ops.embed_sites(self.matrix, self.sites, n)


@dataclass(frozen=True, eq=False)
class LatticeHamiltonian:
    n: int
    boundary: str
    range: int
    terms: tuple[LatticeTerm, ...]
    scale_factor: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.boundary not in (OPEN, PERIODIC):
            raise LatticeError(f"unknown boundary {self.boundary!r}")
        if self.range < 2:
            raise LatticeError("interaction range must be at least 2")
        if not self.scale_factor >= 1.0:
            raise LatticeError("scale_factor must be >= 1")
        for term in self.terms:
            if max(term.sites) > self.n:
                raise LatticeError(f"term sites {term.sites} exceed n={self.n}")
            if term.norm > 1 + NORM_TOL:
                raise LatticeError(f"term on {term.sites} has norm {term.norm} > 1")

    @property
    def dim(self) -> int:
        return 1 << self.n

    def total_matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for term in self.terms:
            out += term.embedded(self.n)
        return out

    def total_sparse(self):
        from scipy import sparse

        out = sparse.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for term in self.terms:
            out = out + ops.embed_sites_sparse(term.matrix, term.sites, self.n)
        return out

    @cached_property
    def sectors(self) -> tuple[np.ndarray, ...]:
        """Basis-index blocks left invariant by every term.

        Connected components of the union of the terms' nonzero patterns.
        Each term, and so every product of term exponentials and e^{-itH}, is
        block diagonal in this partition.
        """
        from scipy import sparse
        from scipy.sparse.csgraph import connected_components

        rows, cols = [np.arange(self.dim)], [np.arange(self.dim)]
        for term in self.terms:
            pattern = ops.embed_sites_sparse(term.matrix != 0, term.sites, self.n).tocoo()
            rows.append(pattern.row)
            cols.append(pattern.col)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        graph = sparse.coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(self.dim, self.dim))
        count, labels = connected_components(graph, directed=False)
        order = np.argsort(labels, kind="stable")
        splits = np.flatnonzero(np.diff(labels[order])) + 1
        blocks = [np.sort(b) for b in np.split(order, splits)]
        blocks.sort(key=lambda b: b[0])
        assert len(blocks) == count
        return tuple(blocks)


def _normalize(matrices: list[np.ndarray], always: bool) -> tuple[list[np.ndarray], float]:
    norms = [ops.spectral_norm(m) for m in matrices]
    top = max(norms, default=0.0)
    if top == 0.0 or (not always and top <= 1.0):
        return matrices, 1.0
    return [m / top for m in matrices], float(top)


def from_local_terms(
    n: int,
    local_terms: Sequence[tuple[int, np.ndarray]],
    *,
    boundary: str = OPEN,
    range: int = 2,
    normalize: bool = True,
    max_qubits: int | None = None,
) -> LatticeHamiltonian:
    """Build a Hamiltonian from (start, matrix) pairs.

    Windows starting within ``range - 1`` of the right edge wrap around when
    ``boundary`` is periodic. If any term norm exceeds 1 and ``normalize`` is
    set, all terms are divided by the largest norm and the factor recorded.
    """
    ops.check_qubits(n, max_qubits)
    matrices = [np.asarray(m, dtype=np.complex128) for _, m in local_terms]
    scale = 1.0
    if normalize:
        matrices, scale = _normalize(matrices, always=False)
    terms = []
    for (start, _), m in zip(local_terms, matrices):
        w = ops.num_qubits(m.shape[0])
        sites = ops.window_sites(int(start), w, n, wrap=boundary == PERIODIC)
        terms.append(LatticeTerm(sites, m))
    return LatticeHamiltonian(n, boundary, range, tuple(terms), scale)


def heisenberg_bond(field: float = 0.0) -> np.ndarray:
    """XX + YY + ZZ + field * (Z ⊗ I) on two sites."""
    X, Y, Z, I = ops.PAULI_X, ops.PAULI_Y, ops.PAULI_Z, ops.PAULI_I
    return np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z) + field * np.kron(Z, I)


def heisenberg_random_field(
    n: int,
    h: float,
    seed: int,
    *,
    boundary: str = OPEN,
    max_qubits: int | None = None,
) -> LatticeHamiltonian:
    """Heisenberg chain with a uniformly random Z field.

    Bond j carries X_jX_{j+1} + Y_jY_{j+1} + Z_jZ_{j+1} + h_j Z_j, with
    h_j ~ U[-h, h] drawn in bond order from SplitMix64(seed). Terms are
    divided by the largest bond norm, which is stored as ``scale_factor``.
    A periodic chain adds the bond (n, 1) with its own field draw.
    """
    if n < 2:
        raise LatticeError("need at least 2 qubits")
    ops.check_qubits(n, max_qubits)
    if h < 0:
        raise LatticeError("field strength must be nonnegative")
    if boundary == PERIODIC and n < 3:
        raise LatticeError("periodic chain needs at least 3 qubits")
    rng = SplitMix64(seed)
    nbonds = n - 1 if boundary == OPEN else n
    fields = [rng.uniform(-h, h) for _ in range(nbonds)]
    matrices, scale = _normalize([heisenberg_bond(f) for f in fields], always=True)
    terms = []
    for j, m in enumerate(matrices, start=1):
        terms.append(LatticeTerm(ops.window_sites(j, 2, n, wrap=True), m))
    meta = {"model": "heisenberg", "h": float(h), "seed": int(seed), "fields": fields}
    return LatticeHamiltonian(n, boundary, 2, tuple(terms), scale, meta)


def random_lattice(
    n: int,
    range: int,
    seed: int,
    *,
    boundary: str = OPEN,
    max_qubits: int | None = None,
) -> LatticeHamiltonian:
    """Generic range-``range`` chain with dense random Hermitian terms.

    Entries are drawn uniformly from [-1, 1] (real and imaginary parts) via
    SplitMix64(seed), symmetrized, and normalized to unit max-norm.
    """
    ops.check_qubits(n, max_qubits)
    if range > n:
        raise LatticeError("range exceeds chain length")
    rng = SplitMix64(seed)
    d = 1 << range
    count = n - range + 1 if boundary == OPEN else n
    matrices = []
    for _ in builtins.range(count):
        a = np.array([[complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in builtins.range(d)]
                      for _ in builtins.range(d)])
        matrices.append((a + a.conj().T) / 2)
    matrices, scale = _normalize(matrices, always=True)
    terms = [LatticeTerm(ops.window_sites(j, range, n, wrap=True), m)
             for j, m in enumerate(matrices, start=1)]
    meta = {"model": "random", "seed": int(seed)}
    return LatticeHamiltonian(n, boundary, range, tuple(terms), scale, meta)


@dataclass(frozen=True)
class TermGrouping:
    """Partition of term indices (0-based) into mutually commuting layers."""

    groups: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.groups) != len(self.labels):
            raise LatticeError("one label per group required")

    def __len__(self) -> int:
        return len(self.groups)

    def validate(self, H: LatticeHamiltonian) -> None:
        flat = sorted(i for g in self.groups for i in g)
        if flat != list(range(len(H.terms))):
            raise LatticeError("grouping does not partition the term indices")
        for g in self.groups:
            for a, i in enumerate(g):
                for j in g[a + 1:]:
                    if H.terms[i].overlaps(H.terms[j]):
                        raise LatticeError(f"terms {i} and {j} share a group but overlap")


def _require(H: LatticeHamiltonian, boundary: str, range: int | None = 2) -> None:
    if H.boundary != boundary:
        raise LatticeError(f"expected {boundary} boundary, got {H.boundary}")
    if range is not None and H.range != range:
        raise LatticeError(f"expected range {range}, got {H.range}")


def _open_terms(H):
    return [i for i, term in enumerate(H.terms) if not term.wraps]


def group_even_odd(H: LatticeHamiltonian) -> TermGrouping:
    """Odd bonds (1,2),(3,4),... then even bonds (2,3),(4,5),..."""
    _require(H, OPEN)
    odd = tuple(i for i in _open_terms(H) if H.terms[i].start % 2 == 1)
    even = tuple(i for i in _open_terms(H) if H.terms[i].start % 2 == 0)
    grouping = TermGrouping((odd, even), ("odd", "even"))
    grouping.validate(H)
    return grouping


def group_periodic(H: LatticeHamiltonian) -> TermGrouping:
    """Odd, even and boundary layers of a periodic nearest-neighbor chain."""
    _require(H, PERIODIC)
    if H.n % 2:
        raise LatticeError("periodic grouping requires even n")
    opened = _open_terms(H)
    odd = tuple(i for i in opened if H.terms[i].start % 2 == 1)
    even = tuple(i for i in opened if H.terms[i].start % 2 == 0)
    bndry = tuple(i for i, term in enumerate(H.terms) if term.wraps)
    grouping = TermGrouping((odd, even, bndry), ("odd", "even", "bndry"))
    grouping.validate(H)
    return grouping


def group_range(H: LatticeHamiltonian) -> TermGrouping:
    """Group m collects the windows starting at j ≡ m (mod range)."""
    _require(H, OPEN, range=None)
    ell = H.range
    groups = []
    for m in range(1, ell + 1):
        groups.append(tuple(i for i, term in enumerate(H.terms) if term.start % ell == m % ell))
    grouping = TermGrouping(tuple(groups), tuple(f"group-{m}" for m in range(1, ell + 1)))
    grouping.validate(H)
    return grouping


def group_singletons(H: LatticeHamiltonian) -> TermGrouping:
    return TermGrouping(tuple((i,) for i in range(len(H.terms))),
                        tuple(f"term-{i}" for i in range(len(H.terms))))


def default_grouping(H: LatticeHamiltonian) -> TermGrouping:
    if H.boundary == PERIODIC:
        return group_periodic(H)
    if H.range == 2:
        return group_even_odd(H)
    return group_range(H)


def group_sum(H: LatticeHamiltonian, G: TermGrouping, g: int) -> np.ndarray:
    """Dense sum of the embedded terms in group ``g``."""
    if not 0 <= g < len(G):
        raise LatticeError(f"group index {g} out of range")
    out = np.zeros((H.dim, H.dim), dtype=np.complex128)
    for i in G.groups[g]:
        out += H.terms[i].embedded(H.n)
    return out


def group_sum_sparse(H: LatticeHamiltonian, G: TermGrouping, g: int):
    from scipy import sparse

    if not 0 <= g < len(G):
        raise LatticeError(f"group index {g} out of range")
    out = sparse.csr_matrix((H.dim, H.dim), dtype=np.complex128)
    for i in G.groups[g]:
        term = H.terms[i]
        out = out + ops.embed_sites_sparse(term.matrix, term.sites, H.n)
    return out
