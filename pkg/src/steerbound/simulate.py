"""Monte-Carlo model of the steering test.

Two kinds of runs share one record format: an honest pair measuring a
Werner state through a lossy detector, and a dishonest sender playing a
mixture of deterministic local strategies. Per-trial sampling reduces to
one multinomial draw over (setting, outcome-category) cells because the
categories are exchangeable across trials; the law is identical and the
cost is independent of the shot count.

Counts per setting are [++, +-, -+, --, null], first sign the sender's
reported outcome, second the receiver's. The postselected estimate
divides the weighted raw correlator by the pooled answered fraction, so
its standard error carries a delta-method covariance term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .bounds import MixedStrategy
from .geometry import MeasurementSet, fingerprint

__all__ = [
    "COUNT_COLUMNS",
    "ExperimentRecord",
    "Verdict",
    "WernerModel",
    "run_cheating",
    "run_honest",
    "verdict",
]

COUNT_COLUMNS = ("pp", "pm", "mp", "mm", "null")

DEMONSTRATED = "steering demonstrated"
NOT_DEMONSTRATED = "not demonstrated"
ANOMALY = "null-rate anomaly"


@dataclass(frozen=True)
class WernerModel:
    """Shared state purity mu and the sender's true detection efficiency."""

    mu: float
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"purity must lie in [0, 1], got {self.mu!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.eta!r}")

    def category_probabilities(self) -> np.ndarray:
        """Per-trial probabilities of [++, +-, -+, --, null] for aligned
        settings. Equal settings on a Werner state anticorrelate, so the
        mixed categories carry the (1 + mu) factor."""
        same = self.eta * (1.0 - self.mu) / 4.0
        diff = self.eta * (1.0 + self.mu) / 4.0
        return np.array([same, diff, diff, same, 1.0 - self.eta])


def _estimates(counts: np.ndarray, weights: np.ndarray) -> dict:
    totals = counts.sum(axis=1).astype(float)
    grand = counts.sum()
    answered = totals - counts[:, 4]
    # X = -(report * receiver outcome): +1 on the mixed categories
    x_sums = (counts[:, 1] + counts[:, 2]) - (counts[:, 0] + counts[:, 3])

    live = totals > 0
    eps_r = np.zeros(len(totals))
    x_bar = np.zeros(len(totals))
    eps_r[live] = answered[live] / totals[live]
    x_bar[live] = x_sums[live] / totals[live]

    u = float(weights @ x_bar)
    v = float(answered.sum() / grand)

    share = totals / grand
    var_x = np.clip(eps_r - x_bar**2, 0.0, None)
    var_u = var_e = cov = 0.0
    for r in np.flatnonzero(live):
        var_u += weights[r] ** 2 * var_x[r] / totals[r]
        var_e += share[r] ** 2 * eps_r[r] * (1.0 - eps_r[r]) / totals[r]
        cov += weights[r] * share[r] * x_bar[r] * (1.0 - eps_r[r]) / totals[r]

    if v > 0:
        s_hat = u / v
        var_s = var_u / v**2 + u**2 * var_e / v**4 - 2.0 * u * cov / v**3
    else:
        s_hat = np.nan
        var_s = np.nan
    return {
        "S_raw": u,
        "S_hat": s_hat,
        "epsilon_hat": v,
        "epsilon_hat_per_setting": eps_r,
        "se_S": float(np.sqrt(max(var_s, 0.0))) if np.isfinite(var_s) else np.nan,
        "se_epsilon": float(np.sqrt(max(var_e, 0.0))),
    }


@dataclass(frozen=True)
class ExperimentRecord:
    """Immutable tally of one simulated run plus derived estimates."""

    counts: np.ndarray
    shots: int
    weights: np.ndarray
    set_hash: str
    seed: int
    estimates: Mapping[str, object]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[1] != 5:
            raise ValueError("counts must have one [pp, pm, mp, mm, null] row per setting")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if int(counts.sum()) != self.shots:
            raise ValueError("counts do not add up to the number of shots")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def to_dict(self) -> dict:
        est = dict(self.estimates)
        est["epsilon_hat_per_setting"] = np.asarray(
            est["epsilon_hat_per_setting"]
        ).tolist()
        return {
            "columns": list(COUNT_COLUMNS),
            "counts": self.counts.tolist(),
            "shots": self.shots,
            "weights": self.weights.tolist(),
            "set_hash": self.set_hash,
            "seed": self.seed,
            "estimates": est,
        }


def _record(cell_probs: np.ndarray, ms: MeasurementSet, shots: int, seed: int):
    if shots < 1:
        raise ValueError("need at least one shot")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    counts = rng.multinomial(int(shots), cell_probs.ravel()).reshape(cell_probs.shape)
    return ExperimentRecord(
        counts=counts,
        shots=int(shots),
        weights=ms.weights,
        set_hash=fingerprint(ms),
        seed=int(seed),
        estimates=_estimates(counts, ms.weights),
    )


def run_honest(
    model: WernerModel, ms: MeasurementSet, shots: int, seed: int
) -> ExperimentRecord:
    """Simulate the honest protocol: uniform setting choice, aligned
    measurements on the Werner state, losses independent of outcome."""
    cat = model.category_probabilities()
    cell_probs = np.tile(cat, (ms.n, 1)) / ms.n
    return _record(cell_probs, ms, shots, seed)


def run_cheating(
    strategy: MixedStrategy, ms: MeasurementSet, shots: int, seed: int
) -> ExperimentRecord:
    """Simulate a sender holding no entanglement: each trial draws a
    mixture component, reports its fixed sign for the chosen setting (0
    means null), while the receiver measures the component's pure state."""
    if strategy.set_hash != fingerprint(ms):
        raise ValueError("strategy was built for a different measurement set")
    n = ms.n
    cell_probs = np.zeros((n, 5))
    for w, strat in strategy.components:
        # receiver's chance of outcome +1 on each setting for this state
        q = (1.0 + ms.directions @ strat.lhs_bloch) / 2.0
        signs = strat.signs
        for r in range(n):
            if signs[r] == 0:
                cell_probs[r, 4] += w
            elif signs[r] > 0:
                cell_probs[r, 0] += w * q[r]
                cell_probs[r, 1] += w * (1.0 - q[r])
            else:
                cell_probs[r, 2] += w * q[r]
                cell_probs[r, 3] += w * (1.0 - q[r])
    cell_probs /= n
    return _record(cell_probs, ms, shots, seed)


@dataclass(frozen=True)
class Verdict:
    """Outcome of testing a record against a bound at level alpha."""

    decision: str
    S_hat: float
    se: float
    epsilon_hat: float
    bound: float
    alpha: float
    p_null_rates: float

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "S_hat": self.S_hat,
            "se": self.se,
            "epsilon_hat": self.epsilon_hat,
            "bound": self.bound,
            "alpha": self.alpha,
        }


def _homogeneity_p(counts: np.ndarray) -> float:
    """Chi-square test that every setting shares one null rate."""
    totals = counts.sum(axis=1).astype(float)
    live = totals > 0
    if live.sum() < 2:
        return 1.0
    answered = (totals - counts[:, 4])[live]
    totals = totals[live]
    pooled = answered.sum() / totals.sum()
    if pooled <= 0.0 or pooled >= 1.0:
        return 1.0
    expected_yes = totals * pooled
    expected_no = totals * (1.0 - pooled)
    stat = float(
        ((answered - expected_yes) ** 2 / expected_yes).sum()
        + (((totals - answered) - expected_no) ** 2 / expected_no).sum()
    )
    return float(stats.chi2.sf(stat, df=live.sum() - 1))


def verdict(record: ExperimentRecord, bound: float, alpha: float = 0.01) -> Verdict:
    """Decide whether a record demonstrates steering against a bound.

    Demonstrated means the one-sided lower confidence limit of the
    postselected estimate clears the bound and the per-setting null rates
    are statistically uniform. A failed uniformity check is reported on
    its own: the symmetric bound simply does not apply to such a record.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"significance level must lie in (0, 1), got {alpha!r}")
    bound = float(bound)
    est = record.estimates
    eps_hat = float(est["epsilon_hat"])
    s_hat = float(est["S_hat"])
    se = float(est["se_S"])
    if eps_hat <= 0.0 or not np.isfinite(s_hat):
        raise ValueError("record has no postselected counts to test")

    p_null = _homogeneity_p(record.counts)
    if p_null < alpha:
        decision = ANOMALY
    else:
        z = float(stats.norm.isf(alpha))
        decision = DEMONSTRATED if s_hat - z * se > bound else NOT_DEMONSTRATED
    return Verdict(
        decision=decision,
        S_hat=s_hat,
        se=se,
        epsilon_hat=eps_hat,
        bound=bound,
        alpha=float(alpha),
        p_null_rates=p_null,
    )
