"""Data-rate bounds and stability tests for quantized feedback loops.

Three layers:

* closed-form scalar bounds: the necessary rate below which no coder or
  controller can stabilize the uncertain plant, the conservative bound that
  treats the worst admissible plant as known, and two earlier sufficient
  bounds used for comparison;
* the stability test itself: the nonnegative companion matrix built from
  worst-case expansion rates, whose spectral radius strictly below one
  certifies the scaling recursion contracts;
* time-varying alphabets: periodic schedules of quantizer sizes, their
  average rate, an exact minimum-average-rate search for scalar plants, and
  the convex relaxation whose optimum reproduces the necessary rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .plant import UncertainPlant
from .quantizer import (
    QuantizerSpec,
    coefficient_expansion_rates,
    expansion_profile,
    quantizer_for,
    uniform_boundaries,
    v_rate,
)

INFEASIBLE = math.inf
"""Distinguished necessary-rate value: uncertainty too large for any rate."""


def r_ratio(lambda_abs: float, eps_n: float) -> float:
    """Contraction ratio r = (lambda - eps)/(lambda + eps) of the layout recursion."""
    if lambda_abs - eps_n <= 1.0:
        raise ValueError(f"need lambda_abs - eps_n > 1, got {lambda_abs} - {eps_n}")
    if eps_n < 0:
        raise ValueError("eps_n must be nonnegative")
    return (lambda_abs - eps_n) / (lambda_abs + eps_n)


def necessary_rate(lambda_abs: float, eps_n: float) -> float:
    """Rate below which stabilization is impossible for the whole box.

    log2(lambda) when the plant pole product is known exactly; otherwise
    log2 of log((1-eps)^2)/log(r), which blows up as eps -> 1 and is
    INFEASIBLE (= +inf) for eps >= 1: past that no bit rate suffices. The
    ratio of logs is base-free.
    """
    if lambda_abs - eps_n <= 1.0:
        raise ValueError(f"need lambda_abs - eps_n > 1, got {lambda_abs} - {eps_n}")
    if eps_n < 0:
        raise ValueError("eps_n must be nonnegative")
    if eps_n >= 1.0:
        return INFEASIBLE
    if eps_n == 0.0:
        return math.log2(lambda_abs)
    r = (lambda_abs - eps_n) / (lambda_abs + eps_n)
    return math.log2(math.log((1.0 - eps_n) ** 2) / math.log(r))


def conservative_known_plant_rate(lambda_abs: float, eps_n: float) -> float:
    """Worst known-plant rate over the box: log2(lambda + eps).

    What one would budget by designing for the most expansive admissible
    plant as if it were known; the necessary rate exceeds it whenever it
    exceeds one bit, which is the cost of not knowing the plant.
    """
    if lambda_abs - eps_n <= 1.0:
        raise ValueError(f"need lambda_abs - eps_n > 1, got {lambda_abs} - {eps_n}")
    return math.log2(lambda_abs + eps_n)


# ---------------------------------------------------------------------------
# companion-matrix stability test


@dataclass(frozen=True)
class HMatrix:
    """Nonnegative companion matrix of worst-case expansion rates.

    w_bar is ordered (w_1, ..., w_n); the matrix has an identity
    superdiagonal and bottom row (w_n, ..., w_1), so iterating it drives the
    envelope of the scaling sequence.
    """

    n: int
    w_bar: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.w_bar) != self.n:
            raise ValueError("w_bar length must equal n >= 1")
        object.__setattr__(self, "w_bar", tuple(float(v) for v in self.w_bar))
        if any(v < 0 for v in self.w_bar):
            raise ValueError("expansion rates must be nonnegative")

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        for j in range(self.n - 1):
            m[j, j + 1] = 1.0
        m[self.n - 1, :] = self.w_bar[::-1]
        return m


def _char_ratio(w_bar: Sequence[float], z: float) -> float:
    """sum_i w_i z^-i; the positive root of (this == 1) is the spectral radius."""
    acc = 0.0
    zi = 1.0
    for wi in w_bar:
        zi *= z
        acc += wi / zi
    return acc


def _bisect_root(w_bar: Sequence[float]) -> float:
    """Positive root of z^n = sum w_i z^{n-i} by bisection; 0 if all rates are 0."""
    total = sum(w_bar)
    if total == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 + total
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _char_ratio(w_bar, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_polish(w_bar: Sequence[float], z: float) -> float:
    for _ in range(60):
        f = _char_ratio(w_bar, z) - 1.0
        df = 0.0
        zi = 1.0
        for i, wi in enumerate(w_bar, start=1):
            zi *= z
            df -= i * wi / (zi * z)
        if df == 0.0:
            break
        znew = z - f / df
        if not (znew > 0.0) or not math.isfinite(znew):
            break
        if abs(znew - z) <= 1e-16 * z:
            z = znew
            break
        z = znew
    return z


def _polished_root(w_bar: Sequence[float]) -> float:
    return _newton_polish(w_bar, _bisect_root(w_bar))


def spectral_radius(H: HMatrix, tol: float = 1e-12, max_iter: int = 10**6) -> float:
    """Spectral radius of the companion matrix.

    Power iteration with max-norm normalization; it converges whenever the
    positive-rate index pattern makes the matrix primitive, so the cyclic
    cases (gcd of positive indices > 1) and any non-converged run fall back
    to bisection on the characteristic polynomial, whose positive root
    equals the radius for every nonnegative companion matrix. Convergence
    needs the iterate itself to settle, not just the normalization factor,
    and the polished value is accepted only if it solves the characteristic
    equation; otherwise the bisection answer is returned.
    """
    w = H.w_bar
    n = H.n
    if all(v == 0.0 for v in w):
        return 0.0
    pos = [i + 1 for i, v in enumerate(w) if v > 0.0]
    g = pos[0]
    for i in pos[1:]:
        g = math.gcd(g, i)
    if g > 1:
        return _polished_root(w)

    x = [1.0] * n
    est_prev = 0.0
    for _ in range(max_iter):
        bottom = 0.0
        for j in range(n):
            bottom += w[n - 1 - j] * x[j]
        y = x[1:] + [bottom]
        m = max(y)
        if m == 0.0:
            return _polished_root(w)
        x_next = [v / m for v in y]
        settled = max(abs(a - b) for a, b in zip(x_next, x)) <= tol
        x = x_next
        if settled and abs(m - est_prev) <= tol * m:
            z = _newton_polish(w, m)
            if abs(_char_ratio(w, z) - 1.0) <= 1e-11:
                return z
            return _polished_root(w)
        est_prev = m
    return _polished_root(w)


@dataclass(frozen=True)
class StabilityTest:
    rho: float
    stable: bool


def sufficient_test(
    p: UncertainPlant, q: QuantizerSpec, margin: float = 0.0
) -> StabilityTest:
    """Does the quantizer contract the scaling envelope for this plant?

    Builds the companion matrix from worst-case expansion rates and checks
    its spectral radius is strictly below 1 - margin.
    """
    prof = expansion_profile(q, p)
    rho = spectral_radius(HMatrix(p.n, prof.w_bar))
    return StabilityTest(rho=rho, stable=rho < 1.0 - margin)


def min_sufficient_N(
    p: UncertainPlant, family: str, N_max: int = 64
) -> int | None:
    """Smallest alphabet size the test certifies, or None within the cap."""
    for N in range(2, N_max + 1):
        try:
            q = quantizer_for(family, p, N)
        except ValueError:
            continue  # no valid layout at this size
        if sufficient_test(p, q).stable:
            return N
    return None


# ---------------------------------------------------------------------------
# periodic schedules


@dataclass(frozen=True)
class Schedule:
    """Periodic alphabet sizes (N_0, ..., N_{m-1}) applied as k mod m."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes:
            raise ValueError("schedule must have at least one slot")
        object.__setattr__(self, "sizes", tuple(int(v) for v in self.sizes))
        if any(v < 2 for v in self.sizes):
            raise ValueError("every slot needs at least 2 levels")

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def average_rate(self) -> float:
        return sum(math.log2(N) for N in self.sizes) / len(self.sizes)


def schedule_quantizers(
    p: UncertainPlant, sched: Schedule, family: str | Sequence[QuantizerSpec]
) -> list[QuantizerSpec]:
    """Resolve a family name or an explicit per-slot quantizer list."""
    if isinstance(family, str):
        return [quantizer_for(family, p, N) for N in sched.sizes]
    qs = list(family)
    if len(qs) != sched.m or any(q.N != N for q, N in zip(qs, sched.sizes)):
        raise ValueError("custom quantizer list does not match the schedule sizes")
    return qs


def periodic_sufficient_test(
    p: UncertainPlant,
    sched: Schedule,
    family: str | Sequence[QuantizerSpec] = "optimal",
    margin: float = 0.0,
) -> StabilityTest:
    """Stability of an m-periodic schedule: radius of the period product.

    The product is taken newest-applied-last, H_{m-1} ... H_1 H_0; its
    spectral radius is order-invariant under cyclic shifts, which matches
    the freedom in choosing the period's phase.
    """
    qs = schedule_quantizers(p, sched, family)
    mats = [HMatrix(p.n, expansion_profile(q, p).w_bar).matrix() for q in qs]
    prod = np.eye(p.n)
    for m_j in mats:
        prod = m_j @ prod
    rho = float(max(abs(np.linalg.eigvals(prod))))
    return StabilityTest(rho=rho, stable=rho < 1.0 - margin)


@dataclass(frozen=True)
class ScheduleSearchResult:
    schedule: Schedule
    avg_rate: float
    exact: bool


def _scalar_step_rates(
    p: UncertainPlant, family: str, N_max: int
) -> list[tuple[int, float, float]]:
    """(N, log2 N, worst rate) per size for a first-order plant."""
    lam, e = abs(p.a_star[0]), p.eps[0]
    out = []
    for N in range(2, N_max + 1):
        try:
            q = quantizer_for(family, p, N)
        except ValueError:
            continue
        wbar = max(coefficient_expansion_rates(q, lam, e))
        if wbar > 0.0:  # always true while the coefficient box expands
            out.append((N, math.log2(N), wbar))
    return out


def _lower_hull(points: list[tuple[float, float]]) -> list[int]:
    """Indices of the lower convex hull of (x, y) points sorted by x."""
    hull: list[int] = []
    for i, (x, y) in enumerate(points):
        while len(hull) >= 2:
            x1, y1 = points[hull[-2]]
            x2, y2 = points[hull[-1]]
            # keep right turns only
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _search_scalar_exact(
    p: UncertainPlant, m_max: int, N_max: int, family: str, margin: float
) -> ScheduleSearchResult | None:
    """Exact minimum-average-rate schedule for n = 1.

    The period product of scalar rates commutes, so schedules are multisets
    of sizes. Enumeration is a size-by-size sweep over nondecreasing
    multisets with three sound prunings: dominance within equal largest
    element, unreachable feasibility, and a cost bound seeded from uniform
    and two-size candidate schedules. Ties prefer fewer slots, then
    lexicographically smaller sizes.
    """
    vals = _scalar_step_rates(p, family, N_max)
    if not vals:
        return None
    target = math.log(1.0 - margin) if margin > 0.0 else 0.0
    cvec = [c for _, c, _ in vals]
    gvec = [math.log(w) for _, _, w in vals]
    nvals = len(vals)
    # cheapest future feasibility credit for slots restricted to index >= i
    suffix_min_g = [0.0] * nvals
    acc = math.inf
    for i in range(nvals - 1, -1, -1):
        acc = min(acc, gvec[i])
        suffix_min_g[i] = acc
    if suffix_min_g[0] >= 0.0:
        return None  # nothing contracts, so no product ever can

    best_total = [math.inf] * (m_max + 1)  # index by slot count

    def offer(total_c: float, m: int) -> None:
        if total_c < best_total[m]:
            best_total[m] = total_c

    # seed: uniform schedules
    for i in range(nvals):
        for m in range(1, m_max + 1):
            if m * gvec[i] < target:
                offer(m * cvec[i], m)
    # seed: adjacent lower-hull pairs in (g, c), mixed in all proportions
    order = sorted(range(nvals), key=lambda i: (gvec[i], cvec[i]))
    pts = [(gvec[i], cvec[i]) for i in order]
    hull = _lower_hull(pts)
    for a, b in zip(hull, hull[1:]):
        ia, ib = order[a], order[b]
        for m in range(2, m_max + 1):
            for k in range(1, m):
                if k * gvec[ia] + (m - k) * gvec[ib] < target:
                    offer(k * cvec[ia] + (m - k) * cvec[ib], m)

    # frontier entries: (c_sum, g_sum, last_index, sizes)
    frontier: list[tuple[float, float, int, tuple[int, ...]]] = [
        (cvec[i], gvec[i], i, (vals[i][0],)) for i in range(nvals)
    ]
    best: tuple[float, int, tuple[int, ...]] | None = None

    def consider(c_sum: float, j: int, sizes: tuple[int, ...]) -> None:
        nonlocal best
        avg = c_sum / j
        key = (avg, j, sizes)
        if best is None or key < best:
            best = key
        offer(c_sum, j)

    for j in range(1, m_max + 1):
        # candidates at this size
        for c_sum, g_sum, _, sizes in frontier:
            if g_sum < target:
                consider(c_sum, j, sizes)
        if j == m_max:
            break
        # A candidate at j+1 slots is worth keeping if some completion to m
        # slots both reaches feasibility (using the cheapest remaining
        # feasibility credit gl) and beats the cost bound best_total[m].
        # Tabulating running maxima of best_total[m] - extra * c_last over
        # the number of added slots makes that an O(1) lookup: the extras
        # that satisfy the feasibility gate form a suffix when gl < 0 and a
        # prefix when gl > 0.
        jj = j + 1
        n_extra = m_max - jj + 1
        suf_tables: list[list[float]] = []
        pre_tables: list[list[float]] = []
        for i in range(nvals):
            ci = cvec[i]
            bound = [best_total[jj + e] - e * ci for e in range(n_extra)]
            suf = bound[:]
            for e in range(n_extra - 2, -1, -1):
                if suf[e + 1] > suf[e]:
                    suf[e] = suf[e + 1]
            pre = bound
            for e in range(1, n_extra):
                if pre[e - 1] > pre[e]:
                    pre[e] = pre[e - 1]
            suf_tables.append(suf)
            pre_tables.append(pre)

        def viable(c2: float, g2: float, last: int) -> bool:
            gl = suffix_min_g[last]
            d = target - g2  # feasible completions need extra * gl < d
            if gl < 0.0:
                e0 = 0 if d > 0.0 else math.floor(d / gl) + 1
                if e0 >= n_extra:
                    return False
                return suf_tables[last][e0] >= c2 - 1e-12
            if d <= 0.0:
                return False
            if gl == 0.0:
                return suf_tables[last][0] >= c2 - 1e-12
            e1 = math.ceil(d / gl) - 1
            if e1 < 0:
                return False
            return pre_tables[last][min(e1, n_extra - 1)] >= c2 - 1e-12

        # extend, keeping multisets nondecreasing so each is generated once
        nxt: dict[int, list[tuple[float, float, tuple[int, ...]]]] = {}
        for c_sum, g_sum, last, sizes in frontier:
            for i in range(last, nvals):
                c2 = c_sum + cvec[i]
                g2 = g_sum + gvec[i]
                if not viable(c2, g2, i):
                    continue
                nxt.setdefault(i, []).append((c2, g2, sizes + (vals[i][0],)))
        frontier = []
        for i, bucket in nxt.items():
            # dominance prune; an entry may only displace another at equal
            # cost if it is also lexicographically no larger, so exact-cost
            # ties keep the witness the final tie-break will want
            bucket.sort(key=lambda e: (e[0], e[2], e[1]))
            kept: list[tuple[float, float, tuple[int, ...]]] = []
            g_cheaper = math.inf  # best g among entries with strictly smaller c
            g_equal = math.inf  # best g among equal-c, lex-smaller entries
            c_prev = None
            for c2, g2, sizes in bucket:
                if c_prev is None or c2 != c_prev:
                    g_cheaper = min(g_cheaper, g_equal)
                    g_equal = math.inf
                    c_prev = c2
                if g2 < g_cheaper and g2 < g_equal:
                    kept.append((c2, g2, sizes))
                g_equal = min(g_equal, g2)
            frontier.extend((c2, g2, i, sizes) for c2, g2, sizes in kept)
        if not frontier:
            break

    if best is None:
        return None
    avg, _, sizes = best
    sched = Schedule(sizes)
    # cross-check in product space; the log-space search must agree
    if not periodic_sufficient_test(p, sched, family, margin).stable:
        return None
    return ScheduleSearchResult(schedule=sched, avg_rate=avg, exact=True)


def _search_heuristic(
    p: UncertainPlant, m_max: int, N_max: int, family: str, margin: float
) -> ScheduleSearchResult | None:
    """Best-effort search for higher-order plants: small periods only."""
    static = min_sufficient_N(p, family, N_max)
    cap_m = min(m_max, 6)
    cap_n = N_max if static is None else min(N_max, static + 4)
    cands = []
    for N in range(2, cap_n + 1):
        try:
            q = quantizer_for(family, p, N)
        except ValueError:
            continue
        prof = expansion_profile(q, p)
        h = HMatrix(p.n, prof.w_bar)
        cands.append((N, math.log2(N), spectral_radius(h)))
    if not cands:
        return None
    rho_min = min(r for _, _, r in cands)
    best: tuple[float, int, tuple[int, ...]] | None = None

    def dfs(start: int, sizes: list[int], rho_prod: float) -> None:
        nonlocal best
        j = len(sizes)
        if j > 0:
            test = periodic_sufficient_test(p, Schedule(tuple(sizes)), family, margin)
            if test.stable:
                avg = sum(math.log2(N) for N in sizes) / j
                key = (avg, j, tuple(sizes))
                if best is None or key < best:
                    best = key
        if j == cap_m:
            return
        for idx in range(start, len(cands)):
            N, _, rho = cands[idx]
            # coarse screen: even finishing every remaining slot at the best
            # per-step radius, the radius product stays expansive
            if rho_prod * rho * rho_min ** (cap_m - j - 1) >= 1.0 - margin:
                continue
            sizes.append(N)
            dfs(idx, sizes, rho_prod * rho)
            sizes.pop()

    dfs(0, [], 1.0)
    if best is None:
        return None
    avg, _, sizes = best
    return ScheduleSearchResult(schedule=Schedule(sizes), avg_rate=avg, exact=False)


def search_periodic_schedule(
    p: UncertainPlant,
    m_max: int,
    N_max: int,
    family: str = "optimal",
    margin: float = 0.0,
) -> ScheduleSearchResult | None:
    """Minimum average-rate periodic schedule within the given caps.

    Exact for first-order plants; a flagged heuristic otherwise.
    """
    if m_max < 1 or N_max < 2:
        raise ValueError("need m_max >= 1 and N_max >= 2")
    if p.n == 1:
        return _search_scalar_exact(p, m_max, N_max, family, margin)
    return _search_heuristic(p, m_max, N_max, family, margin)


# ---------------------------------------------------------------------------
# convex relaxation of the minimum average rate


@dataclass(frozen=True)
class RelaxedRateSolution:
    """Optimum of the continuous-size relaxation.

    components: the m relaxed sizes (all equal to 2^necessary_rate);
    phi: their geometric mean (the relaxed objective);
    psi: the feasibility residual (product of relaxed rates minus one),
    zero at the optimum where the constraint is active.
    """

    components: tuple[float, ...]
    phi: float
    psi: float
    multiplier: float


def relaxed_min_rate(lambda_abs: float, eps_n: float, m: int) -> RelaxedRateSolution:
    """Closed-form optimum of the relaxed schedule problem with m slots.

    Minimizing the geometric mean of continuous sizes subject to the
    product of even-layout worst rates reaching one puts every component at
    2^necessary_rate, confirming periodic scheduling cannot beat the
    necessary rate.
    """
    if m < 1:
        raise ValueError("need at least one slot")
    if not (0.0 < eps_n < 1.0):
        raise ValueError("relaxation needs 0 < eps_n < 1")
    if lambda_abs - eps_n <= 1.0:
        raise ValueError(f"need lambda_abs - eps_n > 1, got {lambda_abs} - {eps_n}")
    r = (lambda_abs - eps_n) / (lambda_abs + eps_n)
    n_star = math.log((1.0 - eps_n) ** 2) / math.log(r)
    comps = (n_star,) * m
    phi = 1.0
    psi_prod = 1.0
    for c in comps:
        phi *= c ** (1.0 / m)
        psi_prod *= eps_n / (1.0 - r ** (c / 2.0))
    lam_mult = -eps_n / (m * (1.0 - eps_n) * math.log(r))
    return RelaxedRateSolution(
        components=comps, phi=phi, psi=psi_prod - 1.0, multiplier=lam_mult
    )


# ---------------------------------------------------------------------------
# block decomposition of a rate sequence


@dataclass(frozen=True)
class Decomposition:
    """Greedy block lengths over the stride-n subsequence starting at alpha."""

    alpha: int
    lengths: tuple[int, ...]


def interval_decomposition(
    v_seq: Sequence[float], n: int, alpha: int
) -> Decomposition | None:
    """Split v_{alpha}, v_{alpha+n}, ... into blocks whose products drop below 1.

    Greedy left-to-right: a block closes at the first position where the
    running product is below one. None if any block is still open when the
    sequence ends, including the case where no block ever closes.
    """
    if n < 1 or not (0 <= alpha < n):
        raise ValueError("need n >= 1 and 0 <= alpha < n")
    lengths: list[int] = []
    run = 1.0
    count = 0
    for j in range(alpha, len(v_seq), n):
        run *= v_seq[j]
        count += 1
        if run < 1.0:
            lengths.append(count)
            run = 1.0
            count = 0
    if count != 0:
        return None
    return Decomposition(alpha=alpha, lengths=tuple(lengths))


# ---------------------------------------------------------------------------
# earlier sufficient bounds for comparison


@dataclass(frozen=True)
class ComparisonBounds:
    """Two earlier scalar sufficient rates; r_suf is None where undefined."""

    r_suf: float | None
    r_suf_prime: float


def comparison_bounds(lambda_abs: float, eps_1: float) -> ComparisonBounds:
    """Sufficient rates from two prior scalar constructions.

    r_suf = log2[(lam - eps(lam + eps)) / (1 - eps(2 lam + 2 eps + 1))],
    defined only while both parts are positive; r_suf_prime =
    log2[lam / (1 - eps)]. Both exceed the necessary rate on their domain.
    """
    if lambda_abs - eps_1 <= 1.0:
        raise ValueError(f"need lambda_abs - eps_1 > 1, got {lambda_abs} - {eps_1}")
    if not (0.0 <= eps_1 < 1.0):
        raise ValueError("eps_1 must be in [0, 1)")
    num = lambda_abs - eps_1 * (lambda_abs + eps_1)
    den = 1.0 - eps_1 * (2.0 * lambda_abs + 2.0 * eps_1 + 1.0)
    r_suf = math.log2(num / den) if num > 0.0 and den > 0.0 else None
    r_suf_prime = math.log2(lambda_abs / (1.0 - eps_1))
    return ComparisonBounds(r_suf=r_suf, r_suf_prime=r_suf_prime)
