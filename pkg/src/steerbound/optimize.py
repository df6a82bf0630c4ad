"""Search for measurement sets minimizing the postselected symmetric bound.

The bound for a fixed set is already exact (a linear program), so the
search only has to move the directions and weights. The landscape is
piecewise smooth with wide basins, which suits a derivative-free simplex
descent restarted from several seeds: known good solids, winners from a
neighbouring efficiency, and random gauge-fixed points.

Nothing here certifies global optimality. What is guaranteed, by
construction, is that a returned bound never exceeds the bound of any
seed it started from, and never undercuts the infinite-setting floor.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bounds import (
    BoundConsistencyError,
    BoundCurve,
    check_floor,
    grouped_symmetric_mixture,
    infinite_floor,
    postselect,
    symmetric_value,
)
from .geometry import (
    DUPLICATE_ANGLE,
    PLATONIC_COUNTS,
    DuplicateDirectionWarning,
    InfeasibleParameters,
    MeasurementSet,
    canonicalize,
    from_parameters,
    geodesic_union,
    parameter_count,
    platonic_set,
    to_parameters,
    with_group_weights,
)
from .lp import LpError
from .strategies import grouped_supports

__all__ = [
    "OptimizationResult",
    "OptimizerConfig",
    "augmented_parameters",
    "infinite_limit_floor",
    "optimize_full",
    "optimize_group_weights",
    "sweep",
]

_BATCH = 4
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

logger = logging.getLogger(__name__)


def infinite_limit_floor(epsilon: float) -> float:
    """Analytic bound in the infinite-setting limit, 1 - epsilon/2.

    Every finite-set bound computed anywhere in the package must sit on
    or above this line.
    """
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {epsilon!r}")
    return infinite_floor(epsilon)


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the multi-start simplex search. Same config, same seed,
    same result, bit for bit."""

    n_starts: int = 32
    max_iters: int | None = None
    f_tol: float = 1e-8
    x_tol: float = 1e-6
    seed: int = 0
    perturb_scale: float = 0.15
    weight_perturb: float = 0.05
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.n_starts < 1:
            raise ValueError("need at least one start")
        if self.f_tol <= 0 or self.x_tol <= 0:
            raise ValueError("tolerances must be positive")

    def to_dict(self) -> dict:
        return {
            "n_starts": self.n_starts,
            "max_iters": self.max_iters,
            "f_tol": self.f_tol,
            "x_tol": self.x_tol,
            "seed": self.seed,
            "perturb_scale": self.perturb_scale,
            "weight_perturb": self.weight_perturb,
            "epsilon": self.epsilon,
        }


@dataclass(frozen=True)
class OptimizationResult:
    """Winning set and bound from one multi-start search."""

    n: int
    epsilon: float
    set: MeasurementSet
    bound: float
    start_index: int
    trace: tuple[float, ...]
    status: str
    config: OptimizerConfig = field(compare=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "bound": self.bound,
            "set": self.set.to_dict(),
            "start_index": self.start_index,
            "status": self.status,
            "trace": list(self.trace),
            "config": self.config.to_dict(),
        }


def _thread_count() -> int:
    raw = os.environ.get("STEERBOUND_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        count = 1
    return max(1, count)


def _quiet_set(directions, weights) -> MeasurementSet:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DuplicateDirectionWarning)
        return MeasurementSet(directions, weights)


def _quiet_from_parameters(coords, n) -> MeasurementSet:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DuplicateDirectionWarning)
        return from_parameters(coords, n)


def _objective(n: int, epsilon: float):
    def fun(coords: np.ndarray) -> float:
        try:
            ms = _quiet_from_parameters(coords, n)
        except InfeasibleParameters:
            return np.inf
        try:
            return postselect(symmetric_value(ms, epsilon), epsilon)
        except LpError:
            # a degenerate iterate is a bad point, not a fatal run
            return np.inf

    return fun


def _random_parameters(n: int, rng: np.random.Generator) -> np.ndarray:
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = rng.dirichlet(np.ones(n))
    return to_parameters(_quiet_set(dirs, weights))


def _jittered(
    coords: np.ndarray,
    n: int,
    angle_scale: float,
    weight_scale: float,
    rng: np.random.Generator,
) -> np.ndarray:
    out = coords.copy()
    n_angles = 2 * n - 3
    out[:n_angles] += rng.normal(0.0, angle_scale, size=n_angles)
    w = out[n_angles:] + rng.normal(0.0, weight_scale, size=n - 1)
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total > 1.0:
        w *= (1.0 - 1e-3) / total
    out[n_angles:] = w
    return out


def augmented_parameters(
    ms: MeasurementSet, n_new: int, rng: np.random.Generator
) -> np.ndarray:
    """Parameters for an n_new-direction set that plays exactly like ms.

    The extra directions land at random with weight zero, so the seeded
    objective value equals the bound of ms and a larger search can only
    improve on it.
    """
    if n_new <= ms.n:
        raise ValueError(f"target size {n_new} must exceed current size {ms.n}")
    extra = rng.normal(size=(n_new - ms.n, 3))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    dirs = np.vstack([ms.directions, extra])
    weights = np.concatenate([ms.weights, np.zeros(n_new - ms.n)])
    return to_parameters(_quiet_set(dirs, weights))


def _baseline_set(n: int, rng: np.random.Generator) -> MeasurementSet | None:
    if n in PLATONIC_COUNTS:
        return platonic_set(n)
    if n == 7:
        return geodesic_union(platonic_set(3), platonic_set(4))
    if n == 16:
        return geodesic_union(platonic_set(6), platonic_set(10))
    below = [m for m in PLATONIC_COUNTS if m < n]
    if below:
        coords = augmented_parameters(platonic_set(max(below)), n, rng)
        return _quiet_from_parameters(coords, n)
    return None


def _minimize(fun, x0: np.ndarray, config: OptimizerConfig, dim: int):
    max_iters = config.max_iters if config.max_iters is not None else 250 * dim
    return minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": max_iters,
            "maxfev": 4 * max_iters,
            "fatol": config.f_tol,
            "xatol": config.x_tol,
            "adaptive": True,
        },
    )


def _run_starts(fun, starts: list[np.ndarray], config: OptimizerConfig, dim: int):
    threads = min(_thread_count(), len(starts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda x0: _minimize(fun, x0, config, dim), starts))
    return [_minimize(fun, x0, config, dim) for x0 in starts]


def _merge_near_duplicates(ms: MeasurementSet) -> MeasurementSet:
    d = ms.directions
    w = ms.weights
    n = ms.n
    gram = np.abs(d @ d.T)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    thresh = np.cos(DUPLICATE_ANGLE)
    for i in range(n):
        for j in range(i + 1, n):
            if gram[i, j] > thresh:
                parent[find(j)] = find(i)

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    if len(clusters) == n:
        return ms

    new_dirs, new_weights = [], []
    for members in clusters.values():
        rep = max(members, key=lambda i: w[i])
        aligned = d[members] * np.sign(d[members] @ d[rep])[:, None]
        total = w[members].sum()
        mean = aligned.mean(axis=0) if total <= 0 else (w[members] @ aligned) / total
        new_dirs.append(mean / np.linalg.norm(mean))
        new_weights.append(total)
    return _quiet_set(np.array(new_dirs), np.array(new_weights))


def optimize_full(
    n: int,
    epsilon: float | None = None,
    config: OptimizerConfig | None = None,
    *,
    extra_starts: Sequence[np.ndarray] = (),
    allow_large: bool = False,
) -> OptimizationResult:
    """Minimize the symmetric postselected bound over all n-direction sets.

    Multi-start Nelder-Mead over the gauge-fixed parameter vector. Seeds:
    the known solid for this n when one exists (so the result can never
    lose to it), any caller-supplied parameter vectors such as a
    neighbouring winner, and random points. Later batches jitter the
    incumbent, with the jitter halving after each batch that fails to
    improve.

    Sizes above 8 cost roughly 1.85^n per evaluation and need
    allow_large=True.
    """
    config = config or OptimizerConfig()
    if epsilon is None:
        epsilon = config.epsilon
    if epsilon is None:
        raise ValueError("no efficiency given, in the call or in the config")
    epsilon = float(epsilon)
    if config.epsilon is not None and config.epsilon != epsilon:
        raise ValueError("config.epsilon disagrees with the epsilon argument")
    limit = 12 if allow_large else 8
    if not 2 <= n <= limit:
        raise ValueError(f"set size {n} outside supported range [2, {limit}]")
    # closed at 1/n: the bound there is exactly 1 for every set
    if not 1.0 / n - 1e-12 <= epsilon <= 1.0:
        raise ValueError(f"efficiency must lie in [1/{n}, 1], got {epsilon!r}")

    dim = parameter_count(n)
    rng = np.random.Generator(np.random.Philox(config.seed))
    fun = _objective(n, epsilon)

    seeds: list[np.ndarray] = []
    baseline = _baseline_set(n, rng)
    if baseline is not None:
        seeds.append(to_parameters(baseline))
    for coords in extra_starts:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (dim,):
            raise ValueError(f"extra start has shape {coords.shape}, expected ({dim},)")
        seeds.append(coords)
    while len(seeds) < min(_BATCH, config.n_starts):
        seeds.append(_random_parameters(n, rng))

    budget = max(config.n_starts, len(seeds))
    best_value = np.inf
    best_coords = None
    best_index = -1
    best_status = "iteration-limit"
    trace: list[float] = []
    angle_scale = config.perturb_scale
    weight_scale = config.weight_perturb

    batch = seeds
    while batch:
        results = _run_starts(fun, batch, config, dim)
        improved = False
        for res in results:
            index = len(trace)
            trace.append(float(res.fun))
            if np.isfinite(res.fun) and res.fun < best_value - config.f_tol:
                improved = True
            if np.isfinite(res.fun) and res.fun < best_value:
                best_value = float(res.fun)
                best_coords = np.asarray(res.x, dtype=float)
                best_index = index
                best_status = "converged" if res.success else "iteration-limit"
        logger.info(
            "n=%d eps=%.6g: %d/%d starts done, best %.12g",
            n, epsilon, len(trace), budget, best_value,
        )
        if not improved:
            angle_scale *= 0.5
            weight_scale *= 0.5
        remaining = budget - len(trace)
        if remaining <= 0:
            break
        batch = []
        for _ in range(min(2, remaining)):
            if best_coords is not None:
                batch.append(_jittered(best_coords, n, angle_scale, weight_scale, rng))
        while len(batch) < min(_BATCH, remaining):
            batch.append(_random_parameters(n, rng))

    if best_coords is None:
        raise RuntimeError("every start produced an infeasible or degenerate point")

    winner = _quiet_from_parameters(best_coords, n)
    merged = _merge_near_duplicates(winner)
    if merged.n != winner.n:
        k_merged = postselect(symmetric_value(merged, epsilon), epsilon)
        if abs(k_merged - best_value) <= 1e-9:
            winner = merged
    winner = canonicalize(winner)
    bound = postselect(symmetric_value(winner, epsilon), epsilon)
    if abs(bound - best_value) > 1e-9:
        raise BoundConsistencyError(
            f"recomputed bound {bound!r} drifted from the search value {best_value!r}"
        )
    check_floor(bound, epsilon)
    return OptimizationResult(
        n=n,
        epsilon=epsilon,
        set=winner,
        bound=bound,
        start_index=best_index,
        trace=tuple(trace),
        status=best_status,
        config=config,
    )


def _grouped_bound(ms: MeasurementSet, q: float, epsilon: float) -> float:
    weighted = with_group_weights(ms, (q, 1.0 - q))
    table = grouped_supports(weighted)
    return postselect(grouped_symmetric_mixture(table, epsilon).value, epsilon)


def optimize_group_weights(
    ms: MeasurementSet, epsilon: float, *, coarse: int = 21
) -> tuple[np.ndarray, float]:
    """Best split of measurement weight between the two groups of a set.

    One-dimensional, but the argmin can jump to a boundary as the
    efficiency moves, so a coarse scan picks the basin before golden
    section narrows it and a parabola fit polishes the final point.
    Returns (group weights, postselected bound).
    """
    if ms.groups is None or len(np.unique(ms.groups)) != 2:
        raise ValueError("group weight optimization needs a two-group set")
    epsilon = float(epsilon)
    n = ms.n
    if not 1.0 / n - 1e-12 <= epsilon <= 1.0:
        raise ValueError(f"efficiency must lie in [1/{n}, 1], got {epsilon!r}")

    def g(q: float) -> float:
        return _grouped_bound(ms, q, epsilon)

    grid = np.linspace(0.0, 1.0, coarse)
    values = [g(q) for q in grid]
    i = int(np.argmin(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, coarse - 1)]

    # golden section on [lo, hi]
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = g(x1), g(x2)
    while b - a > 1e-5:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = g(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = g(x2)
    best_q, best_k = (x1, f1) if f1 <= f2 else (x2, f2)

    # quadratic polish through the bracket midpoints
    h = max(b - a, 1e-5)
    qs = np.clip(np.array([best_q - h, best_q, best_q + h]), 0.0, 1.0)
    if len(np.unique(qs)) == 3:
        fs = np.array([g(qs[0]), best_k, g(qs[2])])
        denom = (qs[0] - qs[1]) * (qs[0] - qs[2]) * (qs[1] - qs[2])
        if abs(denom) > 0:
            a2 = (qs[2] * (fs[1] - fs[0]) + qs[1] * (fs[0] - fs[2]) + qs[0] * (fs[2] - fs[1])) / denom
            b2 = (qs[2] ** 2 * (fs[0] - fs[1]) + qs[1] ** 2 * (fs[2] - fs[0]) + qs[0] ** 2 * (fs[1] - fs[2])) / denom
            if a2 > 0:
                vertex = float(np.clip(-b2 / (2 * a2), 0.0, 1.0))
                fv = g(vertex)
                if fv < best_k:
                    best_q, best_k = vertex, fv
    for q_edge, f_edge in ((0.0, values[0]), (1.0, values[-1])):
        if f_edge < best_k:
            best_q, best_k = q_edge, f_edge
    return np.array([best_q, 1.0 - best_q]), float(best_k)


def sweep(
    n: int,
    epsilons: Sequence[float] | np.ndarray,
    config: OptimizerConfig | None = None,
    *,
    interpolation_points: int = 0,
    allow_large: bool = False,
) -> BoundCurve:
    """Optimized bound curve over an efficiency grid with warm chaining.

    Each grid point seeds the next with its winner, which also forces the
    curve to be non-increasing: a winning set replayed at the next, higher
    efficiency can only have an equal or lower bound. Between grid points
    the optional interpolation evaluates the two adjacent winners, which
    is the bound an experiment would actually use there.

    The winning sets are kept in curve.meta["sets"], aligned with
    meta["grid"].
    """
    config = config or OptimizerConfig()
    grid = np.asarray(epsilons, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("need a strictly increasing efficiency grid")

    results: list[OptimizationResult] = []
    warm: list[np.ndarray] = []
    warm_rng = np.random.Generator(np.random.Philox(config.seed + 0x5EED))
    for i, eps in enumerate(grid):
        point_config = replace(config, seed=config.seed + i, epsilon=None)
        res = optimize_full(
            n, float(eps), point_config, extra_starts=warm, allow_large=allow_large
        )
        results.append(res)
        if res.set.n == n:
            warm = [to_parameters(res.set)]
        else:
            # merged winner lost directions; pad with zero weight to reseed
            warm = [augmented_parameters(res.set, n, warm_rng)]

    xs: list[float] = []
    ks: list[float] = []
    for i, res in enumerate(results):
        xs.append(float(grid[i]))
        ks.append(res.bound)
        if interpolation_points > 0 and i + 1 < len(results):
            inner = np.linspace(grid[i], grid[i + 1], interpolation_points + 2)[1:-1]
            pair = (results[i].set, results[i + 1].set)
            for eps in inner:
                k = min(
                    postselect(symmetric_value(s, float(eps)), float(eps)) for s in pair
                )
                xs.append(float(eps))
                ks.append(k)

    meta = {
        "grid": grid.tolist(),
        "grid_bounds": [r.bound for r in results],
        "sets": [r.set.to_dict() for r in results],
        "statuses": [r.status for r in results],
        "config": config.to_dict(),
    }
    return BoundCurve(
        kind="optimized", epsilons=np.array(xs), bounds=np.array(ks), n=n, meta=meta
    )
