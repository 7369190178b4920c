"""Exact-oracle error measurement, analytic bounds, segment counts and fits."""

from __future__ import annotations

import math
import warnings
import weakref
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import operators as ops
from .formulas import (
    ProductFormula,
    apply_formula,
    even_odd_order,
    exponential_count_per_segment,
    lie_trotter,
)
from .lattice import (
    OPEN,
    LatticeHamiltonian,
    LatticeTerm,
    TermGrouping,
    group_even_odd,
    group_sum_sparse,
)

ERROR_FLOOR = 1e-13
# Trotter error operators have clustered top singular values, which stalls
# power iteration; exact SVD of blocks this size costs under a second.
ORACLE_SVD_MAX_DIM = 1024
MIN_FIT_POINTS = 4


class AnalysisError(ValueError):
    pass


class SegmentWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# exact oracle


class ErrorOracle:
    """Exact propagator of H, stored as eigendecompositions of its sectors.

    Sectors are the invariant blocks found by ``LatticeHamiltonian.sectors``;
    formula unitaries are block diagonal in the same partition, so the
    spectral-norm error is the maximum over blocks.
    """

    def __init__(self, H: LatticeHamiltonian):
        ops.check_qubits(H.n)
        self.H = H
        self.sectors = H.sectors
        total = H.total_sparse().tocsc()
        self._eig = []
        for S in self.sectors:
            block = total[S][:, S].toarray()
            self._eig.append(ops.eigh(0.5 * (block + block.conj().T)))
        self._comm_norms: dict = {}

    def exact_block(self, i: int, t: float) -> np.ndarray:
        if t == 0:
            return np.eye(len(self.sectors[i]), dtype=np.complex128)
        return ops.expm_from_eigh(*self._eig[i], t)

    def exact(self, t: float) -> np.ndarray:
        out = np.zeros((self.H.dim, self.H.dim), dtype=np.complex128)
        for i, S in enumerate(self.sectors):
            out[np.ix_(S, S)] = self.exact_block(i, t)
        return out

    def formula_block(self, F: ProductFormula, i: int, t: float) -> np.ndarray:
        S = self.sectors[i]
        cols = np.zeros((self.H.dim, len(S)), dtype=np.complex128)
        cols[S, np.arange(len(S))] = 1.0
        return apply_formula(F, self.H, t, cols)[S]

    def error(self, F: ProductFormula, t: float) -> float:
        worst = 0.0
        for i in range(len(self.sectors)):
            diff = self.formula_block(F, i, t) - self.exact_block(i, t)
            worst = max(worst, ops.spectral_norm(diff, svd_max_dim=ORACLE_SVD_MAX_DIM))
        return worst

    def commutator_norm(self, G: TermGrouping, a: int = 0, b: int = 1) -> float:
        """‖[H_a, H_b]‖ for two group sums, evaluated sector by sector."""
        key = (G, a, b)
        if key not in self._comm_norms:
            A = group_sum_sparse(self.H, G, a).tocsc()
            B = group_sum_sparse(self.H, G, b).tocsc()
            worst = 0.0
            for S in self.sectors:
                a_s = A[S][:, S].toarray()
                b_s = B[S][:, S].toarray()
                worst = max(worst, ops.spectral_norm(ops.commutator(a_s, b_s), svd_max_dim=ORACLE_SVD_MAX_DIM))
            self._comm_norms[key] = worst
        return self._comm_norms[key]


_ORACLES: "weakref.WeakKeyDictionary[LatticeHamiltonian, ErrorOracle]" = weakref.WeakKeyDictionary()


def oracle(H: LatticeHamiltonian) -> ErrorOracle:
    if H not in _ORACLES:
        _ORACLES[H] = ErrorOracle(H)
    return _ORACLES[H]


def exact_evolution(H: LatticeHamiltonian, t: float) -> np.ndarray:
    """e^{-itH} as a dense 2^n x 2^n unitary."""
    return oracle(H).exact(t)


def measured_error(H: LatticeHamiltonian, F: ProductFormula, t: float) -> float:
    """‖realize(F, H, t) - e^{-itH}‖ in the spectral norm."""
    return oracle(H).error(F, t)


# ---------------------------------------------------------------------------
# first-order bounds


def _two_groups(G: TermGrouping) -> None:
    if len(G) != 2:
        raise AnalysisError(f"expected a two-group grouping, got {len(G)} groups")


def bound_first_order_commutator(H: LatticeHamiltonian, G: TermGrouping, t: float) -> float:
    """(t^2 / 2) ‖[H_even, H_odd]‖."""
    _two_groups(G)
    return 0.5 * t * t * oracle(H).commutator_norm(G)


def _require_open_nn(H: LatticeHamiltonian) -> None:
    if H.boundary != OPEN or H.range != 2:
        raise AnalysisError("this bound needs an open nearest-neighbor chain")


def _window_embed(terms: Sequence[LatticeTerm], sites: Sequence[int]) -> list[np.ndarray]:
    relabel = {q: i + 1 for i, q in enumerate(sites)}
    w = len(sites)
    return [ops.embed_sites(tm.matrix, [relabel[q] for q in tm.sites], w) for tm in terms]


class LocalCommutator(NamedTuple):
    sites: tuple[int, ...]
    matrix: np.ndarray
    neighbours_norm: float
    centre_norm: float


def local_commutators(H: LatticeHamiltonian) -> list[LocalCommutator]:
    """Per odd bond (2k-1, 2k): [H_{2k-2,2k-1} + H_{2k,2k+1}, H_{2k-1,2k}].

    Each commutator lives on the window spanned by the bond and its
    neighbours; missing neighbours count as zero.
    """
    _require_open_nn(H)
    by_start = {tm.start: tm for tm in H.terms}
    out = []
    for start in sorted(by_start):
        if start % 2 == 0:
            continue
        centre = by_start[start]
        nbrs = [by_start[s] for s in (start - 1, start + 1) if s in by_start]
        sites = sorted({q for tm in [centre, *nbrs] for q in tm.sites})
        mats = _window_embed([centre, *nbrs], sites)
        c = mats[0]
        nsum = sum(mats[1:], np.zeros_like(c))
        out.append(LocalCommutator(tuple(sites), ops.commutator(nsum, c), ops.spectral_norm(nsum), centre.norm))
    return out


def locality_expansion(H: LatticeHamiltonian) -> np.ndarray:
    """Dense Σ_k [H_{2k-2,2k-1} + H_{2k,2k+1}, H_{2k-1,2k}] on the full chain."""
    out = np.zeros((H.dim, H.dim), dtype=np.complex128)
    for lc in local_commutators(H):
        out += ops.embed_sites(lc.matrix, lc.sites, H.n)
    return out


def bound_first_order_local(H: LatticeHamiltonian, G: TermGrouping | None, t: float) -> float:
    """(t^2 / 2) Σ_k ‖[H_{2k-2,2k-1} + H_{2k,2k+1}, H_{2k-1,2k}]‖."""
    _require_open_nn(H)
    if G is not None:
        _two_groups(G)
    return 0.5 * t * t * sum(ops.spectral_norm(lc.matrix) for lc in local_commutators(H))


def bound_first_order_norm_product(H: LatticeHamiltonian, t: float) -> float:
    """(t^2 / 2) Σ_k 2 ‖H_{2k-2,2k-1} + H_{2k,2k+1}‖ ‖H_{2k-1,2k}‖, at most 2 n t^2."""
    _require_open_nn(H)
    total = sum(2.0 * lc.neighbours_norm * lc.centre_norm for lc in local_commutators(H))
    return 0.5 * t * t * total


# ---------------------------------------------------------------------------
# swaps and ordering robustness


def bound_swap(Hk: LatticeTerm, Hl: LatticeTerm, t: float) -> float:
    """2 t^2 when the two bonds share a site, else 0."""
    if Hk.width != 2 or Hl.width != 2:
        raise AnalysisError("swap bound is stated for nearest-neighbor terms")
    return 2.0 * t * t if Hk.overlaps(Hl) else 0.0


def swap_commutator_norm(Hk: LatticeTerm, Hl: LatticeTerm, t: float) -> float:
    """‖[e^{-itH_k}, e^{-itH_l}]‖ computed on the union of the two windows."""
    sites = sorted(set(Hk.sites) | set(Hl.sites))
    relabel = {q: i + 1 for i, q in enumerate(sites)}
    w = len(sites)
    uk = ops.embed_sites(Hk.exp(t), [relabel[q] for q in Hk.sites], w)
    ul = ops.embed_sites(Hl.exp(t), [relabel[q] for q in Hl.sites], w)
    return ops.spectral_norm(ops.commutator(uk, ul))


def _check_sigma(H: LatticeHamiltonian, sigma: Sequence[int]) -> list[int]:
    sigma = [int(i) for i in sigma]
    if sorted(sigma) != list(range(len(H.terms))):
        raise AnalysisError("sigma is not a permutation of the term indices")
    return sigma


def swap_count(H: LatticeHamiltonian, sigma: Sequence[int]) -> int:
    """Overlapping-support transpositions needed to bubble-sort sigma into even-odd order.

    Swaps of commuting (disjoint) neighbours are performed but not counted.
    """
    _require_open_nn(H)
    seq = _check_sigma(H, sigma)
    rank = {term: pos for pos, term in enumerate(even_odd_order(H))}
    keys = [rank[i] for i in seq]
    count = 0
    for end in range(len(seq) - 1, 0, -1):
        swapped = False
        for j in range(end):
            if keys[j] > keys[j + 1]:
                if H.terms[seq[j]].overlaps(H.terms[seq[j + 1]]):
                    count += 1
                keys[j], keys[j + 1] = keys[j + 1], keys[j]
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                swapped = True
        if not swapped:
            break
    return count


def bound_ordering_robust(H: LatticeHamiltonian, sigma: Sequence[int], t: float) -> float:
    """2 t^2 (instance swap count) + first-order local bound."""
    return 2.0 * t * t * swap_count(H, sigma) + bound_first_order_local(H, None, t)


def bound_ordering_robust_blanket(H: LatticeHamiltonian, t: float) -> float:
    """The ordering-independent value 4 n t^2 + first-order local bound."""
    return 4.0 * H.n * t * t + bound_first_order_local(H, None, t)


# ---------------------------------------------------------------------------
# segment counts


def _min_segments(total_error: Callable[[int], float], eps: float, max_doublings: int) -> int:
    if not eps > 0:
        raise AnalysisError("eps must be positive")
    hi = 1
    for _ in range(max_doublings):
        if total_error(hi) <= eps:
            break
        hi *= 2
    else:
        raise AnalysisError(f"error target {eps} not met within {2 ** max_doublings} segments")
    lo = hi // 2  # total_error(lo) > eps, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if total_error(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def segments_from_bound(
    bound_fn: Callable[[LatticeHamiltonian, float], float],
    H: LatticeHamiltonian,
    T: float,
    eps: float,
    *,
    max_doublings: int = 60,
) -> int:
    """Smallest r >= 1 with r * bound_fn(H, T / r) <= eps."""
    return _min_segments(lambda r: r * bound_fn(H, T / r), eps, max_doublings)


def segments_first_order_closed_form(H: LatticeHamiltonian, G: TermGrouping, T: float, eps: float) -> int:
    """ceil(T^2 ‖[H_even, H_odd]‖ / (2 eps)), at least 1."""
    _two_groups(G)
    if not eps > 0:
        raise AnalysisError("eps must be positive")
    return max(1, math.ceil(T * T * oracle(H).commutator_norm(G) / (2.0 * eps)))


def segments_measured(
    H: LatticeHamiltonian,
    F: ProductFormula,
    T: float,
    eps: float,
    *,
    max_doublings: int = 40,
    window: int = 8,
) -> int:
    """Smallest r with r * measured_error(H, F, T / r) <= eps.

    Doubling then bisection, followed by a monotonicity check at r-1, r, r+1.
    A violation emits SegmentWarning and falls back to a linear scan of
    [max(1, r - window), r].
    """
    orc = oracle(H)
    cache: dict[int, float] = {}

    def total(r: int) -> float:
        if r not in cache:
            cache[r] = r * orc.error(F, T / r)
        return cache[r]

    r = _min_segments(total, eps, max_doublings)
    around = [total(q) for q in (r - 1, r, r + 1) if q >= 1]
    if any(b > a for a, b in zip(around, around[1:])):
        warnings.warn(
            f"r * err(T/r) is not monotone near r={r}; scanning a window of {window}",
            SegmentWarning,
            stacklevel=2,
        )
        for q in range(max(1, r - window), r + 1):
            if total(q) <= eps:
                return q
    return r


def noisy_optimal_segments(alpha: float, beta: float, k: int) -> float:
    """Minimizer (2k alpha / beta)^{1/(2k+1)} of alpha / r^{2k} + beta r."""
    if not (alpha > 0 and beta > 0) or k < 1:
        raise AnalysisError("alpha, beta must be positive and k >= 1")
    r = (alpha * 2 * k / beta) ** (1.0 / (2 * k + 1))

    def cost(x):
        return alpha / x ** (2 * k) + beta * x

    if not (cost(r * 0.99) > cost(r) and cost(r * 1.01) > cost(r)):
        raise AnalysisError("closed-form segment count is not a local minimum")
    return r


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float
    xs: tuple[float, ...] = field(repr=False)
    ys: tuple[float, ...] = field(repr=False)

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> PowerLawFit:
    """Least squares line through (log x, log y); intercept is natural-log."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalysisError("xs and ys must be equal-length sequences")
    if x.size < MIN_FIT_POINTS:
        raise AnalysisError(f"need at least {MIN_FIT_POINTS} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise AnalysisError("power-law fit needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return PowerLawFit(float(slope), float(intercept), min(1.0, max(0.0, r2)), tuple(x), tuple(y))


def effective_order(
    H: LatticeHamiltonian,
    F: ProductFormula,
    t_grid: Sequence[float],
    *,
    floor: float = ERROR_FLOOR,
) -> PowerLawFit:
    """Log-log slope of measured error against t (order p gives slope p + 1)."""
    ts = np.asarray(sorted(float(t) for t in t_grid), dtype=float)
    if ts.size < MIN_FIT_POINTS or np.any(ts <= 0):
        raise AnalysisError("need at least 4 positive times")
    if ts[-1] / ts[0] < 10.0 * (1 - 1e-12):
        raise AnalysisError("time grid must span at least one decade")
    errs = np.array([measured_error(H, F, t) for t in ts])
    keep = errs >= floor
    if keep.sum() < MIN_FIT_POINTS:
        raise AnalysisError(f"only {int(keep.sum())} errors above the {floor:g} floor")
    return fit_power_law(ts[keep], errs[keep])


# ---------------------------------------------------------------------------
# reports


@dataclass
class ErrorReport:
    n: int
    t: float
    formula: str
    measured_error: float
    bounds: dict[str, float]
    r_measured: int | None = None
    r_bound: int | None = None
    exponentials_total: int | None = None


def error_report(
    H: LatticeHamiltonian,
    F: ProductFormula,
    t: float,
    *,
    total_time: float | None = None,
    eps: float | None = None,
) -> ErrorReport:
    """Measured error plus every applicable analytic bound for one instance.

    First-order bounds are attached only to first-order formulas on an open
    nearest-neighbor chain; segment counts only when total_time and eps are set.
    """
    err = measured_error(H, F, t)
    bounds: dict[str, float] = {}
    first_order_chain = F.claimed_order == 1 and H.boundary == OPEN and H.range == 2
    G = None
    if first_order_chain:
        G = group_even_odd(H)
        if F.grouping == G:
            bounds["commutator"] = bound_first_order_commutator(H, G, t)
        bounds["local"] = bound_first_order_local(H, G, t)
        bounds["norm_product"] = bound_first_order_norm_product(H, t)
        if F.label == "permuted":
            sigma = [s.group for s in F.stages]
            bounds["ordering_robust"] = bound_ordering_robust(H, sigma, t)
            bounds["ordering_robust_blanket"] = bound_ordering_robust_blanket(H, t)
    report = ErrorReport(H.n, t, F.label, err, bounds)
    if total_time is not None and eps is not None:
        report.r_measured = segments_measured(H, F, total_time, eps)
        report.exponentials_total = report.r_measured * exponential_count_per_segment(F, H)
        if G is not None:
            report.r_bound = segments_from_bound(
                lambda h, tau: bound_first_order_local(h, G, tau), H, total_time, eps
            )
    return report


def default_first_order(H: LatticeHamiltonian) -> ProductFormula:
    return lie_trotter(group_even_odd(H))

