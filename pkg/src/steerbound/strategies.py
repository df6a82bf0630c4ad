"""Deterministic cheating strategies over weighted measurement axes.

A deterministic strategy fixes, for every setting, either a null report or
a +/-1 answer, and sends one pure qubit state. Its payoff against a set
with axes u_r and weights p_r is

    value = || sum_r A_r p_r u_r ||

because the best qubit state for a fixed answer sheet is the eigenvector
of the corresponding Pauli combination, whose top eigenvalue is exactly
that Euclidean norm. The hidden-state Bloch vector attaining it is
b = -v / ||v||, which makes every non-null term -A_r (b . u_r) of the
correlator non-negative.

Global sign flips of the answer sheet do not change the payoff, so only
sign choices whose first non-null answer is +1 are enumerated; the total
work for all supports of an n-axis set is (3^n - 1) / 2 norm evaluations.
Enumeration order and tie-breaking are fixed so repeated runs produce
byte-identical tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import MeasurementSet, fingerprint

__all__ = [
    "SUPPORT_LIMIT",
    "DeterministicStrategy",
    "GroupedStrategyTable",
    "StrategyTable",
    "SupportPattern",
    "best_by_count",
    "best_signs",
    "enumerate_supports",
    "grouped_supports",
    "strategy_value",
    "support_values",
]

#: default ceiling on exhaustive support enumeration
SUPPORT_LIMIT = 16

_SIGN_CACHE_MAX_N = 12
_sign_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


@dataclass(frozen=True)
class SupportPattern:
    """Subset of settings a strategy answers, encoded as a bit mask.

    Bit r is set when setting r gets a non-null answer. The bitstring form
    puts setting 0 leftmost.
    """

    bits: int
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"mask {self.bits:#x} out of range for n={self.n}")

    @property
    def m(self) -> int:
        return int(self.bits).bit_count()

    @property
    def epsilon(self) -> float:
        """Apparent efficiency of the pattern: answered fraction m / n."""
        return self.m / self.n

    def indices(self) -> np.ndarray:
        return np.flatnonzero((self.bits >> np.arange(self.n)) & 1)

    def bitstring(self) -> str:
        return "".join("1" if (self.bits >> r) & 1 else "0" for r in range(self.n))

    @classmethod
    def from_bitstring(cls, s: str) -> "SupportPattern":
        bits = 0
        for r, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << r
            elif ch != "0":
                raise ValueError(f"bad mask bitstring {s!r}")
        return cls(bits, len(s))

    @classmethod
    def coerce(cls, support, n: int) -> "SupportPattern":
        if isinstance(support, SupportPattern):
            if support.n != n:
                raise ValueError(f"support is over {support.n} settings, set has {n}")
            return support
        if isinstance(support, (int, np.integer)):
            return cls(int(support), n)
        flags = np.asarray(support, dtype=bool).reshape(-1)
        if flags.shape[0] != n:
            raise ValueError(f"support length {flags.shape[0]} does not match n={n}")
        return cls(int(sum(1 << r for r in np.flatnonzero(flags))), n)


@dataclass(frozen=True)
class DeterministicStrategy:
    """One answer sheet plus the hidden state that realizes its payoff."""

    signs: np.ndarray  # (n,) entries in {-1, 0, +1}
    value: float
    lhs_bloch: np.ndarray  # (3,) unit vector
    support: SupportPattern

    def __post_init__(self) -> None:
        signs = np.asarray(self.signs, dtype=np.int8).reshape(-1)
        mask = int(sum(1 << r for r in np.flatnonzero(signs != 0)))
        if mask != self.support.bits or signs.shape[0] != self.support.n:
            raise ValueError("signs and support pattern disagree")
        bloch = np.asarray(self.lhs_bloch, dtype=float).reshape(3)
        if abs(float(np.linalg.norm(bloch)) - 1.0) > 1e-9:
            raise ValueError("hidden-state Bloch vector must be unit length")
        signs.setflags(write=False)
        bloch.setflags(write=False)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "lhs_bloch", bloch)

    @property
    def n(self) -> int:
        return self.support.n

    def to_dict(self) -> dict:
        return {
            "mask": self.support.bitstring(),
            "signs": self.signs.tolist(),
            "value": self.value,
            "bloch": self.lhs_bloch.tolist(),
        }


@dataclass(frozen=True)
class StrategyTable:
    """Best deterministic strategy for every support of one set."""

    set: MeasurementSet
    set_hash: str
    entries: Mapping[int, DeterministicStrategy]

    @property
    def n(self) -> int:
        return self.set.n

    def values(self) -> np.ndarray:
        """Payoffs indexed by mask integer."""
        out = np.zeros(1 << self.n)
        for mask, strat in self.entries.items():
            out[mask] = strat.value
        return out

    def export_jsonl(self, path: str) -> None:
        from . import serialize

        with open(path, "w", encoding="utf-8") as fh:
            for mask in sorted(self.entries):
                fh.write(serialize.dumps(self.entries[mask].to_dict()))
                fh.write("\n")


@dataclass(frozen=True)
class GroupedStrategyTable:
    """Best strategy per (answered in group 0, answered in group 1) class."""

    set: MeasurementSet
    set_hash: str
    group_sizes: tuple[int, int]
    entries: Mapping[tuple[int, int], DeterministicStrategy]

    @property
    def n(self) -> int:
        return self.set.n


def _weighted_dirs(ms: MeasurementSet) -> np.ndarray:
    return ms.weights[:, None] * ms.directions


def _signed_norm(directions: np.ndarray, weights: np.ndarray, signs: np.ndarray) -> float:
    return float(np.linalg.norm((signs * weights) @ directions))


def strategy_value(ms: MeasurementSet, signs: Sequence[int] | np.ndarray) -> float:
    """Payoff of one answer sheet: || sum_r signs_r p_r u_r ||."""
    s = np.asarray(signs, dtype=float).reshape(-1)
    if s.shape[0] != ms.n:
        raise ValueError(f"expected {ms.n} signs, got {s.shape[0]}")
    if not np.all(np.isin(s, (-1.0, 0.0, 1.0))):
        raise ValueError("signs must be -1, 0, or +1")
    return _signed_norm(ms.directions, ms.weights, s)


def _bloch_for(v: np.ndarray, value: float) -> np.ndarray:
    if value > 0.0:
        return -v / value
    return np.array([0.0, 0.0, 1.0])


def _strategy_from_signs(ms: MeasurementSet, signs: np.ndarray) -> DeterministicStrategy:
    signs = np.asarray(signs, dtype=np.int8)
    v = (signs * ms.weights) @ ms.directions
    value = float(np.linalg.norm(v))
    pattern = SupportPattern.coerce(signs != 0, ms.n)
    return DeterministicStrategy(signs, value, _bloch_for(v, value), pattern)


def _sign_block(mask: int, n: int) -> np.ndarray:
    """All sign rows for one support, first answered setting pinned to +1.

    Rows are ordered lexicographically greatest first (+1 sorts before -1),
    so taking the first row attaining a maximum applies the documented
    tie-break.
    """
    bits = np.flatnonzero((mask >> np.arange(n)) & 1)
    m = bits.size
    if m == 0:
        return np.zeros((0, n), dtype=np.int8)
    rows = 1 << (m - 1)
    block = np.zeros((rows, n), dtype=np.int8)
    block[:, bits[0]] = 1
    j = np.arange(rows)
    for i in range(1, m):
        bit = (j >> (m - 1 - i)) & 1
        block[:, bits[i]] = (1 - 2 * bit).astype(np.int8)
    return block


def _sign_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked sign rows for every support of n settings, plus block starts."""
    cached = _sign_cache.get(n)
    if cached is not None:
        return cached
    blocks = [_sign_block(mask, n) for mask in range(1 << n)]
    table = np.vstack([b for b in blocks if b.shape[0]]).astype(float)
    starts = np.concatenate([[0], np.cumsum([b.shape[0] for b in blocks])])
    table.setflags(write=False)
    starts.setflags(write=False)
    _sign_cache[n] = (table, starts)
    return table, starts


def support_values(ms: MeasurementSet, limit: int = SUPPORT_LIMIT) -> np.ndarray:
    """Best payoff for every support mask, indexed by mask integer.

    The fast path evaluates all (3^n - 1)/2 candidate answer sheets in one
    matrix product against a cached sign table; larger n fall back to a
    per-mask sweep.
    """
    n = ms.n
    if n > limit:
        raise ValueError(f"support enumeration is capped at n={limit}, got n={n}")
    values = np.zeros(1 << n)
    if n <= _SIGN_CACHE_MAX_N:
        table, starts = _sign_table(n)
        norms = np.linalg.norm(table @ _weighted_dirs(ms), axis=1)
        values[1:] = np.maximum.reduceat(norms, starts[1:-1])
    else:
        wd = _weighted_dirs(ms)
        for mask in range(1, 1 << n):
            block = _sign_block(mask, n)
            values[mask] = np.linalg.norm(block @ wd, axis=1).max()
    return values


def best_signs(ms: MeasurementSet, support) -> DeterministicStrategy:
    """Optimal answer sheet on a fixed support.

    Ties are broken toward the lexicographically greatest sign sequence
    with +1 ranked above -1; the first non-null answer is +1 by the global
    sign convention.
    """
    pattern = SupportPattern.coerce(support, ms.n)
    if pattern.m == 0:
        return _strategy_from_signs(ms, np.zeros(ms.n, dtype=np.int8))
    block = _sign_block(pattern.bits, ms.n)
    norms = np.linalg.norm(block @ _weighted_dirs(ms), axis=1)
    return _strategy_from_signs(ms, block[int(np.argmax(norms))])


def enumerate_supports(ms: MeasurementSet, limit: int = SUPPORT_LIMIT) -> StrategyTable:
    """Best strategy for every one of the 2^n supports."""
    n = ms.n
    if n > limit:
        raise ValueError(f"support enumeration is capped at n={limit}, got n={n}")
    entries = {mask: best_signs(ms, mask) for mask in range(1 << n)}
    return StrategyTable(set=ms, set_hash=fingerprint(ms), entries=entries)


def best_by_count(table: StrategyTable, m: int) -> DeterministicStrategy:
    """Best strategy among supports answering exactly m settings.

    Ties go to the lowest mask integer.
    """
    n = table.n
    if not 0 <= m <= n:
        raise ValueError(f"answer count {m} out of range for n={n}")
    best = None
    for mask in range(1 << n):
        if int(mask).bit_count() != m:
            continue
        cand = table.entries[mask]
        if best is None or cand.value > best.value:
            best = cand
    return best


def _full_sign_rows(n_group: int) -> tuple[np.ndarray, np.ndarray]:
    """All {-1, 0, +1} rows over one group, with per-row answer counts.

    Unlike the global table both signs of each sheet appear; the global
    flip is canonicalized at the pair level by grouped_supports.
    """
    rows_per_mask = []
    for mask in range(1 << n_group):
        bits = np.flatnonzero((mask >> np.arange(n_group)) & 1)
        m = bits.size
        rows = np.zeros((1 << m, n_group), dtype=np.int8)
        j = np.arange(1 << m)
        for i in range(m):
            bit = (j >> (m - 1 - i)) & 1
            rows[:, bits[i]] = (1 - 2 * bit).astype(np.int8)
        rows_per_mask.append(rows)
    stacked = np.vstack(rows_per_mask)
    counts = np.count_nonzero(stacked, axis=1)
    return stacked, counts


def grouped_supports(ms: MeasurementSet) -> GroupedStrategyTable:
    """Best strategy per class of (answers in group 0, answers in group 1).

    Only per-group answer counts matter to the grouped symmetry constraint,
    so one best representative per class is enough. Requires exactly two
    group labels.
    """
    if ms.groups is None:
        raise ValueError("set carries no group labels")
    labels = np.unique(ms.groups)
    if labels.size != 2:
        raise ValueError(f"need exactly two groups, found {labels.size}")
    idx_a = np.flatnonzero(ms.groups == labels[0])
    idx_b = np.flatnonzero(ms.groups == labels[1])
    na, nb = idx_a.size, idx_b.size

    wd = _weighted_dirs(ms)
    rows_a, count_a = _full_sign_rows(na)
    rows_b, count_b = _full_sign_rows(nb)
    sums_a = rows_a @ wd[idx_a]
    sums_b = rows_b @ wd[idx_b]
    by_count_a = [np.flatnonzero(count_a == m) for m in range(na + 1)]
    by_count_b = [np.flatnonzero(count_b == m) for m in range(nb + 1)]

    entries = {}
    for ma in range(na + 1):
        ia = by_count_a[ma]
        for mb in range(nb + 1):
            ib = by_count_b[mb]
            pair = sums_a[ia][:, None, :] + sums_b[None, ib, :]
            norms = np.linalg.norm(pair, axis=2)
            flat = int(np.argmax(norms))
            ra, rb = ia[flat // ib.size], ib[flat % ib.size]
            signs = np.zeros(ms.n, dtype=np.int8)
            signs[idx_a] = rows_a[ra]
            signs[idx_b] = rows_b[rb]
            nz = np.flatnonzero(signs)
            if nz.size and signs[nz[0]] < 0:
                signs = -signs
            entries[(ma, mb)] = _strategy_from_signs(ms, signs)
    return GroupedStrategyTable(
        set=ms, set_hash=fingerprint(ms), group_sizes=(na, nb), entries=entries
    )
