"""Product formulas as ordered stages of coefficient-scaled group exponentials.

Stages are stored in application order: ``stages[0]`` acts first on the
state, so the realized operator is

    exp(-i c_last t H_{g_last}) ... exp(-i c_0 t H_{g_0}).

With the even-odd grouping this makes the odd layer act first, i.e. the
first-order formula is e^{-itH_even} e^{-itH_odd}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from . import operators as ops
from .lattice import LatticeError, LatticeHamiltonian, TermGrouping, group_even_odd, group_singletons

CONSISTENCY_TOL = 1e-12


class FormulaError(ValueError):
    pass


class Stage(NamedTuple):
    group: int
    coeff: float


@dataclass(frozen=True)
class ProductFormula:
    grouping: TermGrouping
    stages: tuple[Stage, ...]
    claimed_order: int
    label: str

    def __post_init__(self):
        stages = tuple(Stage(int(g), float(c)) for g, c in self.stages)
        object.__setattr__(self, "stages", stages)
        for s in stages:
            if not 0 <= s.group < len(self.grouping):
                raise FormulaError(f"stage group {s.group} outside grouping")
            if not math.isfinite(s.coeff):
                raise FormulaError("stage coefficients must be finite")
        if self.claimed_order < 1:
            raise FormulaError("claimed order must be positive")

    def coefficient_sums(self) -> list[float]:
        sums = [0.0] * len(self.grouping)
        for s in self.stages:
            sums[s.group] += s.coeff
        return sums

    def check_consistency(self, tol: float = CONSISTENCY_TOL) -> None:
        for g, total in enumerate(self.coefficient_sums()):
            if abs(total - 1.0) > tol:
                raise FormulaError(f"group {g} coefficients sum to {total!r}, not 1")


def merge_stages(stages: Sequence[Stage]) -> tuple[Stage, ...]:
    """Fuse neighbouring stages acting on the same group."""
    out: list[Stage] = []
    for s in stages:
        if out and out[-1].group == s.group:
            out[-1] = Stage(s.group, out[-1].coeff + s.coeff)
        else:
            out.append(Stage(s.group, s.coeff))
    return tuple(out)


def suzuki_coefficient(k: int) -> float:
    """p_k = 1 / (4 - 4^{1/(2k-1)}) for the order-2k recursion step."""
    if k < 2:
        raise FormulaError("the recursion coefficient is defined for k >= 2")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def lie_trotter(G: TermGrouping) -> ProductFormula:
    if len(G) < 1:
        raise FormulaError("grouping has no groups")
    F = ProductFormula(G, tuple(Stage(g, 1.0) for g in range(len(G))), 1, "lie-trotter")
    F.check_consistency()
    return F


def _strang(m: int) -> list[Stage]:
    if m == 1:
        return [Stage(0, 1.0)]
    half = [Stage(g, 0.5) for g in range(m - 1)]
    return half + [Stage(m - 1, 1.0)] + half[::-1]


def suzuki(G: TermGrouping, k: int) -> ProductFormula:
    """Order-2k symmetric formula by the five-fold Suzuki recursion."""
    if k < 1:
        raise FormulaError("k must be >= 1")
    if len(G) < 1:
        raise FormulaError("grouping has no groups")
    stages = _strang(len(G))
    for j in range(2, k + 1):
        p = suzuki_coefficient(j)
        outer = [Stage(s.group, s.coeff * p) for s in stages]
        middle = [Stage(s.group, s.coeff * (1.0 - 4.0 * p)) for s in stages]
        stages = list(merge_stages(outer + outer + middle + outer + outer))
    F = ProductFormula(G, merge_stages(stages), 2 * k, f"suzuki-{2 * k}")
    F.check_consistency()
    return F


def permuted_first_order(H: LatticeHamiltonian, sigma: Sequence[int]) -> ProductFormula:
    """First-order formula with one exponential per term, applied in ``sigma`` order.

    ``sigma[j]`` is the (0-based) index of the term applied j-th.
    """
    if H.range != 2 or H.boundary != "open":
        raise FormulaError("permuted orderings need an open range-2 Hamiltonian")
    sigma = [int(i) for i in sigma]
    if sorted(sigma) != list(range(len(H.terms))):
        raise FormulaError("sigma is not a permutation of the term indices")
    G = group_singletons(H)
    return ProductFormula(G, tuple(Stage(i, 1.0) for i in sigma), 1, "permuted")


def even_odd_order(H: LatticeHamiltonian) -> list[int]:
    """Term indices in even-odd application order (odd bonds first)."""
    G = group_even_odd(H)
    return [i for g in G.groups for i in g]


def sequential_order(H: LatticeHamiltonian) -> list[int]:
    """Term indices sorted by starting site: (1,2), (2,3), ..."""
    return sorted(range(len(H.terms)), key=lambda i: H.terms[i].start)


def stage_count(F: ProductFormula) -> int:
    return len(F.stages)


def exponential_count_per_segment(F: ProductFormula, H: LatticeHamiltonian) -> int:
    """Number of term exponentials (two-qubit gates for range 2) per segment."""
    _check_grouping(F, H)
    return sum(len(F.grouping.groups[s.group]) for s in F.stages)


def _check_grouping(F: ProductFormula, H: LatticeHamiltonian) -> None:
    try:
        F.grouping.validate(H)
    except LatticeError as exc:
        raise FormulaError(f"formula grouping does not match the Hamiltonian: {exc}") from exc


def apply_formula(
    F: ProductFormula,
    H: LatticeHamiltonian,
    t: float,
    mat: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    """Left-multiply the 2^n-row matrix ``mat`` by the realized formula.

    Each group exponential is applied as the product of its terms' local
    exponentials, which is exact because terms within a group act on
    disjoint sites.
    """
    mat = np.array(mat, dtype=np.complex128, order="C")
    if t == 0:
        return mat
    for s in F.stages:
        for i in F.grouping.groups[s.group]:
            term = H.terms[i]
            if not np.any(term.matrix):
                continue
            mat = _kernels.apply_local(mat, term.exp(s.coeff * t), term.sites, H.n, backend)
    return mat


def realize(
    F: ProductFormula,
    H: LatticeHamiltonian,
    t: float,
    *,
    method: str = "local",
    backend: str | None = None,
) -> np.ndarray:
    """Dense unitary of the formula at time ``t``.

    ``method="local"`` applies per-term gates (fast, see apply_formula);
    ``method="dense"`` multiplies full group exponentials
    herm_expm(group_sum(g), coeff * t) and serves as a reference path.
    """
    _check_grouping(F, H)
    ops.check_qubits(H.n)
    if method == "local":
        return apply_formula(F, H, t, np.eye(H.dim, dtype=np.complex128), backend)
    if method == "dense":
        from .lattice import group_sum

        sums = {}
        out = np.eye(H.dim, dtype=np.complex128)
        for s in F.stages:
            if s.group not in sums:
                sums[s.group] = ops.eigh(group_sum(H, F.grouping, s.group))
            out = ops.expm_from_eigh(*sums[s.group], s.coeff * t) @ out
        return out
    raise FormulaError(f"unknown realization method {method!r}")


def formula_for_order(G: TermGrouping, order: int) -> ProductFormula:
    """Order 1 -> Lie-Trotter; even order 2k -> Suzuki with half-order k."""
    if order == 1:
        return lie_trotter(G)
    if order >= 2 and order % 2 == 0:
        return suzuki(G, order // 2)
    raise FormulaError(f"unsupported order {order}; use 1 or an even number")
