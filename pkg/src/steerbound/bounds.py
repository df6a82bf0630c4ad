"""Nondeterministic bounds assembled from deterministic strategy tables.

A cheating party free to mix deterministic strategies is limited only by
the constraints the verifier can check. Three regimes matter:

* asymmetric: only the overall answered fraction is checked, so the best
  mixture is the upper concave envelope over the per-count optima;
* symmetric: the answered fraction must look the same on every setting,
  which is a small equality-form linear program over all supports;
* grouped symmetric: for two-group sets only the per-group fractions are
  checked, collapsing the program to one column per count class.

All three return the mixture itself, not just its value, so the simulator
can play the exact strategy the bound describes. Dividing a mixture value
by the efficiency gives the postselected bound that a lossy experiment
must beat.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import serialize
from .geometry import MeasurementSet, fingerprint
from .lp import LpError, lp_solve
from .strategies import (
    DeterministicStrategy,
    GroupedStrategyTable,
    StrategyTable,
    SupportPattern,
    best_by_count,
    best_signs,
    enumerate_supports,
    grouped_supports,
    support_values,
)

__all__ = [
    "BoundConsistencyError",
    "BoundCurve",
    "MixedStrategy",
    "asymmetric_mixture",
    "bound_curve",
    "check_floor",
    "grouped_symmetric_mixture",
    "postselect",
    "symmetric_mixture",
    "symmetric_value",
    "unviolable",
]

_WEIGHT_EPS = 1e-12
CURVE_KINDS = ("asymmetric", "symmetric", "grouped-symmetric", "optimized")


class BoundConsistencyError(RuntimeError):
    """A computed bound violated an exact structural guarantee."""


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {epsilon!r}")
    return epsilon


@dataclass(frozen=True)
class MixedStrategy:
    """Convex mixture of deterministic strategies at one efficiency."""

    epsilon: float
    value: float
    components: tuple[tuple[float, DeterministicStrategy], ...]
    set_hash: str
    certificate: dict | None = None

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("mixture needs at least one component")
        w = np.array([wi for wi, _ in self.components])
        if np.any(w < -_WEIGHT_EPS):
            raise ValueError(f"component weights must be non-negative, got min {w.min()!r}")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1 within 1e-9")
        n = self.components[0][1].n
        mean_eff = sum(wi * s.support.m / n for wi, s in self.components)
        if abs(mean_eff - self.epsilon) > 1e-9:
            raise ValueError(
                f"mean efficiency {mean_eff!r} does not match epsilon {self.epsilon!r}"
            )
        mean_val = sum(wi * s.value for wi, s in self.components)
        if abs(mean_val - self.value) > 1e-9:
            raise ValueError("mixture value does not match its components")

    @property
    def n(self) -> int:
        return self.components[0][1].n

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "value": self.value,
            "components": [
                {"w": max(w, 0.0), "mask": s.support.bitstring(), "signs": s.signs.tolist()}
                for w, s in self.components
            ],
            "n": self.n,
            "set_hash": self.set_hash,
        }


def mixture_from_dict(data: dict, ms: MeasurementSet) -> MixedStrategy:
    """Rebuild a mixture against its set, recomputing values and states."""
    if data.get("set_hash") not in (None, fingerprint(ms)):
        raise ValueError("mixture was computed for a different set")
    comps = []
    for item in data["components"]:
        pattern = SupportPattern.from_bitstring(item["mask"])
        signs = np.asarray(item["signs"], dtype=np.int8)
        strat = _strategy_from(ms, signs, pattern)
        comps.append((float(item["w"]), strat))
    total = sum(w for w, _ in comps)
    comps = [(w / total, s) for w, s in comps]
    value = sum(w * s.value for w, s in comps)
    epsilon = sum(w * s.support.m / ms.n for w, s in comps)
    return MixedStrategy(
        epsilon=epsilon, value=value, components=tuple(comps), set_hash=fingerprint(ms)
    )


def _strategy_from(ms, signs, pattern):
    from .strategies import _strategy_from_signs

    strat = _strategy_from_signs(ms, signs)
    if strat.support != pattern:
        raise ValueError("mask and signs disagree in serialized mixture")
    return strat


def postselect(value: float, epsilon: float) -> float:
    """Convert a mixture value into the bound on the postselected record."""
    epsilon = _check_epsilon(epsilon)
    return float(value) / epsilon


def unviolable(k: float) -> bool:
    """True when a postselected bound cannot be beaten by any quantum state."""
    return k >= 1.0 - 1e-12


def infinite_floor(epsilon: float) -> float:
    # re-exported through optimize.infinite_limit_floor; kept here so the
    # floor check has no import cycle
    return 1.0 - 0.5 * float(epsilon)


def check_floor(k: float, epsilon: float) -> None:
    """No finite-axis bound may undercut the infinite-axis floor 1 - eps/2."""
    if k < infinite_floor(epsilon) - 1e-9:
        raise BoundConsistencyError(
            f"bound {k!r} at efficiency {epsilon!r} fell below the "
            f"infinite-setting floor {infinite_floor(epsilon)!r}"
        )


def _upper_envelope(points: list[tuple[float, DeterministicStrategy]]):
    """Upper concave envelope of (epsilon, strategy-value) points."""
    hull: list[tuple[float, DeterministicStrategy]] = []
    for x, strat in points:
        while len(hull) >= 2:
            (x1, s1), (x2, s2) = hull[-2], hull[-1]
            # pop the middle point when it sits on or below the new chord
            if (s2.value - s1.value) * (x - x1) <= (strat.value - s1.value) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((x, strat))
    return hull


def asymmetric_mixture(table: StrategyTable, epsilon: float) -> MixedStrategy:
    """Best mixture when only the overall answered fraction is checked.

    Equals the upper concave envelope over the per-count optima, realized
    by at most two deterministic strategies. Efficiencies below 1/n are
    legal inputs; the resulting postselected bound is simply unviolable.
    """
    epsilon = _check_epsilon(epsilon)
    n = table.n
    pts = [(m / n, best_by_count(table, m)) for m in range(n + 1)]
    hull = _upper_envelope(pts)
    xs = [x for x, _ in hull]
    i = bisect.bisect_left(xs, epsilon)
    if i < len(xs) and abs(xs[i] - epsilon) < 1e-15:
        comps = ((1.0, hull[i][1]),)
        value = hull[i][1].value
    else:
        (x_lo, s_lo), (x_hi, s_hi) = hull[i - 1], hull[i]
        lam = (x_hi - epsilon) / (x_hi - x_lo)
        comps = ((lam, s_lo), (1.0 - lam, s_hi))
        value = lam * s_lo.value + (1.0 - lam) * s_hi.value
    return MixedStrategy(
        epsilon=epsilon, value=value, components=comps, set_hash=table.set_hash
    )


_indicator_cache: dict[int, np.ndarray] = {}


def _mask_indicators(n: int) -> np.ndarray:
    """(n, 2^n) matrix whose column S marks the settings S answers."""
    cached = _indicator_cache.get(n)
    if cached is None:
        masks = np.arange(1 << n)
        cached = ((masks[None, :] >> np.arange(n)[:, None]) & 1).astype(float)
        cached.setflags(write=False)
        _indicator_cache[n] = cached
    return cached


def _symmetric_lp(values: np.ndarray, n: int, epsilon: float):
    A = np.vstack([np.ones(1 << n), _mask_indicators(n)])
    b = np.concatenate([[1.0], np.full(n, epsilon)])
    return lp_solve(values, A, b)


def symmetric_value(ms: MeasurementSet, epsilon: float) -> float:
    """Value-only fast path for the symmetric bound (used by the search).

    Only best-sign columns enter the program: the constraints see just the
    answered/null pattern of each support, so a column with suboptimal
    signs is dominated by the best sheet on the same support and can never
    raise the optimum.
    """
    epsilon = _check_epsilon(epsilon)
    return _symmetric_lp(support_values(ms), ms.n, epsilon).value


def symmetric_mixture(table: StrategyTable, epsilon: float) -> MixedStrategy:
    """Best mixture whose answered fraction is epsilon on every setting."""
    epsilon = _check_epsilon(epsilon)
    res = _symmetric_lp(table.values(), table.n, epsilon)
    comps = tuple(
        (float(res.x[mask]), table.entries[mask])
        for mask in np.flatnonzero(res.x > _WEIGHT_EPS)
    )
    return MixedStrategy(
        epsilon=epsilon,
        value=res.value,
        components=comps,
        set_hash=table.set_hash,
        certificate={"duals": res.duals.tolist(), "residuals": dict(res.residuals)},
    )


def grouped_symmetric_mixture(gtable: GroupedStrategyTable, epsilon: float) -> MixedStrategy:
    """Symmetric bound for two-group sets via per-class columns.

    Constraints fix each group's mean answered fraction to epsilon. When
    every axis within a group is equivalent under the set's symmetry this
    equals the full per-setting program at a fraction of the size, and it
    is the only tractable route for the 16-axis geodesic set.
    """
    epsilon = _check_epsilon(epsilon)
    na, nb = gtable.group_sizes
    classes = sorted(gtable.entries)
    values = np.array([gtable.entries[c].value for c in classes])
    A = np.vstack(
        [
            np.ones(len(classes)),
            np.array([c[0] / na for c in classes]),
            np.array([c[1] / nb for c in classes]),
        ]
    )
    b = np.array([1.0, epsilon, epsilon])
    res = lp_solve(values, A, b)
    comps = tuple(
        (float(res.x[i]), gtable.entries[classes[i]])
        for i in np.flatnonzero(res.x > _WEIGHT_EPS)
    )
    return MixedStrategy(
        epsilon=epsilon,
        value=res.value,
        components=comps,
        set_hash=gtable.set_hash,
        certificate={"duals": res.duals.tolist(), "residuals": dict(res.residuals)},
    )


@dataclass(frozen=True)
class BoundCurve:
    """Postselected bound as a function of apparent efficiency."""

    kind: str
    epsilons: np.ndarray
    bounds: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}, expected one of {CURVE_KINDS}")
        eps = np.asarray(self.epsilons, dtype=float)
        ks = np.asarray(self.bounds, dtype=float)
        if eps.ndim != 1 or eps.shape != ks.shape or eps.size == 0:
            raise ValueError("curve needs matching nonempty epsilon and bound arrays")
        if np.any(np.diff(eps) <= 0.0):
            raise ValueError("curve efficiencies must be strictly increasing")
        if np.any(ks <= 0.0):
            raise ValueError("bounds must be positive")
        if np.any(np.diff(ks) > 1e-8):
            raise BoundConsistencyError(
                "postselected bound must be non-increasing in efficiency"
            )
        eps.setflags(write=False)
        ks.setflags(write=False)
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "bounds", ks)

    def value_at(self, epsilon: float) -> float:
        """Conservative lookup: the bound at the last grid point at or
        below epsilon. The curve is non-increasing, so this never
        understates the true bound; below the grid it returns +inf.
        """
        i = int(np.searchsorted(self.epsilons, epsilon + 1e-12, side="right")) - 1
        if i < 0:
            return np.inf
        return float(self.bounds[i])

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epsilon,k,kind,n\n")
            for e, k in zip(self.epsilons, self.bounds):
                fh.write(
                    f"{serialize.format_float(e)},{serialize.format_float(k)},{self.kind},{self.n}\n"
                )

    @classmethod
    def from_csv(cls, path: str) -> "BoundCurve":
        eps, ks, kinds, ns = [], [], set(), set()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "epsilon,k,kind,n":
                raise ValueError(f"unexpected curve header {header!r}")
            for line in fh:
                if not line.strip():
                    continue
                e, k, kind, n = line.strip().split(",")
                eps.append(float(e))
                ks.append(float(k))
                kinds.add(kind)
                ns.add(int(n))
        if len(kinds) != 1 or len(ns) != 1:
            raise ValueError("curve file mixes kinds or set sizes")
        return cls(kinds.pop(), np.array(eps), np.array(ks), ns.pop())


def bound_curve(
    ms: MeasurementSet,
    kind: str,
    epsilons: Sequence[float] | np.ndarray,
    *,
    return_mixtures: bool = False,
):
    """Postselected bound curve of the requested kind over a grid.

    The strategy table is built once and shared across the grid. With
    return_mixtures=True the result is (curve, mixtures) so callers can
    persist the optimal cheating strategies alongside the curve.
    """
    if kind not in ("asymmetric", "symmetric", "grouped-symmetric"):
        raise ValueError(f"cannot tabulate curves of kind {kind!r}")
    grid = np.asarray(epsilons, dtype=float)
    if kind == "grouped-symmetric":
        gtable = grouped_supports(ms)
        mixes = [grouped_symmetric_mixture(gtable, e) for e in grid]
    else:
        table = enumerate_supports(ms)
        builder = asymmetric_mixture if kind == "asymmetric" else symmetric_mixture
        mixes = [builder(table, e) for e in grid]
    ks = []
    for e, mix in zip(grid, mixes):
        k = postselect(mix.value, e)
        check_floor(k, e)
        ks.append(k)
    curve = BoundCurve(
        kind=kind,
        epsilons=grid,
        bounds=np.array(ks),
        n=ms.n,
        meta={"set": ms.to_dict()},
    )
    return (curve, mixes) if return_mixtures else curve
