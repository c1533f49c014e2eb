"""Brute-force and probe-based checks of the closed-form results.

Everything here recomputes a quantity the library derives analytically, by
grid search, exhaustive enumeration, or random probing, so tests can compare
the two routes. Nothing in this module reuses the closed forms it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import UncertainPlant
from .quantizer import (
    QuantizerSpec,
    cells,
    coefficient_expansion_rates,
    decode,
    encode,
)
from .rates import relaxed_min_rate


@dataclass(frozen=True)
class GridSearchResult:
    h: tuple[float, ...]
    value: float


def _worst_rate(h: np.ndarray, lam: float, eps: float, odd: bool) -> np.ndarray:
    """max_l w_l for boundary rows h[..., 0..K]; vectorized over leading axes."""
    hi = h[..., 1:]
    lo = h[..., :-1]
    w = (lam + eps) * hi - (lam - eps) * lo
    if odd:
        w = np.concatenate(
            [2.0 * (lam + eps) * h[..., 1:2], w[..., 1:]], axis=-1
        )
    return w.max(axis=-1)


def grid_optimal_boundaries(
    lambda_abs: float, eps_n: float, N: int, resolution: float = 1e-3
) -> GridSearchResult:
    """Minimize the worst cell expansion rate by brute force.

    Coarse grid at the given resolution over the interior boundaries, then
    four rounds of joint shrinking-bracket refinement, each a factor of ten
    finer. The free boundaries move together in each round: the objective is
    a max of linear functions whose active piece couples adjacent boundaries,
    so refining one coordinate at a time can stall on a non-optimal ridge.
    Four rounds put grid quantization a decade under the tightest agreement
    tolerance used by the checks.
    """
    if not (0.0 < resolution <= 1e-2):
        raise ValueError("resolution must be in (0, 1e-2]")
    if not (2 <= N <= 6):
        raise ValueError("grid search supports N in 2..6")
    if eps_n < 0 or lambda_abs - eps_n <= 1.0:
        raise ValueError("need eps_n >= 0 and lambda_abs - eps_n > 1")
    k = (N + 1) // 2
    odd = N % 2 == 1
    free = k - 1

    def objective(interior: np.ndarray) -> np.ndarray:
        shape = interior.shape[:-1]
        full = np.concatenate(
            [
                np.zeros(shape + (1,)),
                interior,
                np.full(shape + (1,), 0.5),
            ],
            axis=-1,
        )
        return _worst_rate(full, lambda_abs, eps_n, odd)

    if free == 0:
        return GridSearchResult(h=(0.0, 0.5), value=float(objective(np.zeros((0,)))))

    axis = np.arange(resolution, 0.5, resolution)
    if free == 1:
        cand = axis[:, None]
        vals = objective(cand)
        best = cand[int(np.argmin(vals))].copy()
    else:
        h1 = axis[:, None]
        h2 = axis[None, :]
        pairs = np.stack(np.broadcast_arrays(h1, h2), axis=-1)
        vals = objective(pairs)
        vals = np.where(h1 < h2, vals, np.inf)
        i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        best = np.array([axis[i], axis[j]])

    # Bracket radius 25 steps = 2.5x the previous round's step: on a shallow
    # diagonal valley the incumbent can sit more than one previous-step away
    # from the true minimizer, so a +-1 bracket would chase it forever.
    step = resolution
    for _ in range(4):
        step /= 10.0
        offsets = step * np.arange(-25, 26)
        grids = [best[c] + offsets for c in range(free)]
        mesh = np.meshgrid(*grids, indexing="ij")
        trial = np.stack([m.ravel() for m in mesh], axis=-1)
        ok = (trial[:, 0] > 0.0) & (trial[:, -1] < 0.5)
        for c in range(free - 1):
            ok &= trial[:, c] < trial[:, c + 1]
        trial = trial[ok]
        vals = objective(trial)
        best = trial[int(np.argmin(vals))].copy()

    h_full = (0.0, *best.tolist(), 0.5)
    return GridSearchResult(h=h_full, value=float(objective(best[None, :])[0]))


def verify_equalization(
    q: QuantizerSpec, p: UncertainPlant, tol: float = 1e-12
) -> bool:
    """Are all cell expansion rates of the leading coefficient equal?

    Relative spread of the rate row across cells, compared against tol. A
    two-level quantizer has a single rate and is trivially equalized.
    """
    rates = coefficient_expansion_rates(q, abs(p.a_star[-1]), p.eps[-1])
    mx, mn = max(rates), min(rates)
    return mx - mn <= tol * mx


def verify_relaxation_kkt(
    lambda_abs: float,
    eps_n: float,
    m: int,
    trials: int = 10_000,
    seed: int = 0,
    slack: float = 1e-9,
) -> bool:
    """Probe the relaxed-schedule optimum for local optimality.

    Draws random perturbations of the equal-component optimum, projects each
    back onto the active feasibility surface by re-solving the last
    component, and reports False if any projected probe beats the optimum's
    geometric mean by more than slack, or if the claimed optimum is not on
    the surface to begin with.
    """
    sol = relaxed_min_rate(lambda_abs, eps_n, m)
    if abs(sol.psi) > 1e-10:
        return False
    r = (lambda_abs - eps_n) / (lambda_abs + eps_n)
    log_r = math.log(r)
    n_star = sol.components[0]
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        head = n_star + rng.uniform(-0.5, 0.5, size=m - 1)
        if np.any(head <= 0.0):
            continue
        prod_head = 1.0
        for c in head:
            den = 1.0 - r ** (c / 2.0)
            if den <= 0.0:
                prod_head = math.inf
                break
            prod_head *= eps_n / den
        if not math.isfinite(prod_head):
            continue
        # last component restoring the rate product to one
        tail_arg = 1.0 - eps_n * prod_head
        if not (0.0 < tail_arg < 1.0):
            continue
        tail = 2.0 * math.log(tail_arg) / log_r
        if tail <= 0.0:
            continue
        log_phi = (sum(math.log(c) for c in head) + math.log(tail)) / m
        if math.exp(log_phi) < sol.phi - slack:
            return False
    return True


def exhaustive_encode_decode(q: QuantizerSpec, samples: int) -> bool:
    """Check the quantizer partitions [-1/2, 1/2] and roundtrips every point.

    Scans a uniform grid plus every boundary and a point nudged to each of
    its sides: the symbol must be in range, the point must lie in the
    half-open cell it encodes to, and the decoded closed cell must contain
    it.
    """
    if samples < q.N:
        raise ValueError("need at least one sample per cell")
    cs = cells(q)
    edges = [c.lo for c in cs] + [cs[-1].hi]
    if edges[0] != -0.5 or edges[-1] != 0.5:
        return False
    if any(not (a < b) for a, b in zip(edges, edges[1:])):
        return False
    pts = list(np.linspace(-0.5, 0.5, samples))
    for e in edges:
        pts.append(e)
        pts.append(min(0.5, e + 1e-12))
        pts.append(max(-0.5, e - 1e-12))
    for x in pts:
        s = encode(q, x)
        if not (1 <= s <= q.N):
            return False
        lo, hi = edges[s - 1], edges[s]
        inside = lo <= x < hi or (s == q.N and x == hi)
        if not inside:
            return False
        if not decode(q, s, 1.0).contains(x):
            return False
    return True
