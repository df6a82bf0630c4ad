"""Measurement geometry on the Bloch sphere.

A measurement setting is a spin axis: a unit Bloch vector with its antipode
identified, because flipping the axis merely relabels the two outcomes.
Axes are stored as canonical-hemisphere representatives so sets admit exact
comparison. This module builds the regular (Platonic-vertex) axis sets,
weighted unions of dual pairs (geodesic sets), and the gauge-fixed
coordinate chart over arbitrary weighted arrangements that the measurement
optimizer searches.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import serialize

__all__ = [
    "DUPLICATE_ANGLE",
    "DuplicateDirectionWarning",
    "GeometryError",
    "InfeasibleParameters",
    "MeasurementSet",
    "canonical_axis",
    "canonicalize",
    "fingerprint",
    "from_parameters",
    "geodesic_union",
    "parameter_count",
    "platonic_set",
    "to_parameters",
    "with_group_weights",
]

#: axes closer than this angle (radians) count as duplicates
DUPLICATE_ANGLE = 1e-4

_WEIGHT_TOL = 1e-12
_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
PLATONIC_COUNTS = (2, 3, 4, 6, 10)


class GeometryError(ValueError):
    """Invalid geometric input: bad shapes, weights, or axes."""


class InfeasibleParameters(GeometryError):
    """Parameter vector implies a weight outside the probability simplex.

    Distinct from plain GeometryError so search code can penalize the point
    instead of treating it as a programming error.
    """


class DuplicateDirectionWarning(UserWarning):
    """Two axes in one set are closer than DUPLICATE_ANGLE."""


def canonical_axis(u: Sequence[float] | np.ndarray) -> np.ndarray:
    """Normalize u and return the canonical antipodal representative.

    The canonical hemisphere is z > 0, with boundary ties broken by x > 0
    and then y > 0, so exactly one of {u, -u} is canonical for any nonzero
    vector.
    """
    v = np.asarray(u, dtype=float).reshape(3)
    nrm = float(np.linalg.norm(v))
    if not math.isfinite(nrm) or nrm == 0.0:
        raise GeometryError(f"axis must be a finite nonzero 3-vector, got {u!r}")
    v = v / nrm
    if v[2] < 0.0 or (v[2] == 0.0 and (v[0] < 0.0 or (v[0] == 0.0 and v[1] < 0.0))):
        v = -v
    return v + 0.0  # clear any -0.0 so exact comparisons behave


@dataclass(frozen=True)
class MeasurementSet:
    """Weighted set of measurement axes, optionally split into two groups.

    directions: (n, 3) array, one canonical axis per row.
    weights:    (n,) probabilities of choosing each setting, summing to 1.
    groups:     optional (n,) integer labels; used by two-group operations.
    """

    directions: np.ndarray
    weights: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self) -> None:
        dirs = np.asarray(self.directions, dtype=float)
        if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] == 0:
            raise GeometryError(f"directions must be a nonempty (n, 3) array, got shape {dirs.shape}")
        dirs = np.vstack([canonical_axis(row) for row in dirs])

        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != dirs.shape[0]:
            raise GeometryError("weights and directions must have matching length")
        if np.any(w < -_WEIGHT_TOL) or not np.all(np.isfinite(w)):
            raise GeometryError("weights must be non-negative and finite")
        w = np.maximum(w, 0.0)
        if abs(float(w.sum()) - 1.0) > _WEIGHT_TOL:
            raise GeometryError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {w.sum()!r}")

        g = self.groups
        if g is not None:
            g = np.asarray(g, dtype=int).reshape(-1)
            if g.shape[0] != dirs.shape[0]:
                raise GeometryError("groups and directions must have matching length")
            g.setflags(write=False)

        gram = np.abs(dirs @ dirs.T)
        np.fill_diagonal(gram, 0.0)
        if np.any(gram > math.cos(DUPLICATE_ANGLE)):
            warnings.warn(
                "set contains near-duplicate axes (angle below "
                f"{DUPLICATE_ANGLE} rad)",
                DuplicateDirectionWarning,
                stacklevel=2,
            )

        dirs.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "groups", g)

    @property
    def n(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def equal_weighted(
        cls, directions: Sequence[Sequence[float]] | np.ndarray, groups=None
    ) -> "MeasurementSet":
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        n = dirs.shape[0]
        return cls(dirs, np.full(n, 1.0 / n), groups)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "directions": self.directions.tolist(),
            "weights": self.weights.tolist(),
            "groups": None if self.groups is None else self.groups.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementSet":
        ms = cls(
            np.asarray(data["directions"], dtype=float),
            np.asarray(data["weights"], dtype=float),
            None if data.get("groups") is None else np.asarray(data["groups"], dtype=int),
        )
        if int(data.get("n", ms.n)) != ms.n:
            raise GeometryError("declared n does not match the direction count")
        return ms


def fingerprint(ms: MeasurementSet) -> str:
    """Stable hash of a set's exact serialized content."""
    return serialize.sha16(serialize.dumps(ms.to_dict()))


def platonic_set(n: int) -> MeasurementSet:
    """Equal-weighted axis set from the regular solid with n vertex axes.

    n=2 square, n=3 octahedron, n=4 cube (its four long diagonals),
    n=6 icosahedron, n=10 dodecahedron.
    """
    p = _GOLDEN
    if n == 2:
        dirs = [(0.0, 0.0, 1.0), (1.0, 0.0, 0.0)]
    elif n == 3:
        dirs = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    elif n == 4:
        dirs = [(1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1)]
    elif n == 6:
        dirs = [(0, 1, p), (0, -1, p), (1, p, 0), (-1, p, 0), (p, 0, 1), (-p, 0, 1)]
    elif n == 10:
        # face centers of the n=6 icosahedron above, so the two sets nest
        dirs = [
            (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1),
            (0, p, 1 / p), (0, -p, 1 / p),
            (p, 1 / p, 0), (p, -1 / p, 0),
            (1 / p, 0, p), (-1 / p, 0, p),
        ]
    else:
        raise GeometryError(
            f"no regular arrangement with {n} axes: supported counts are {PLATONIC_COUNTS}"
        )
    return canonicalize(MeasurementSet.equal_weighted(np.asarray(dirs, dtype=float)))


def geodesic_union(
    a: MeasurementSet, b: MeasurementSet, group_weights: Sequence[float] | None = None
) -> MeasurementSet:
    """Union of two axis sets with per-group weight totals.

    Group 0 holds a's axes and group 1 holds b's; each group's total weight
    is split evenly among its members. Defaults make every axis equally
    weighted. Dual compatibility of a and b is the caller's responsibility.
    """
    na, nb = a.n, b.n
    if group_weights is None:
        qa, qb = na / (na + nb), nb / (na + nb)
    else:
        qa, qb = (float(q) for q in group_weights)
        if qa < 0.0 or qb < 0.0:
            raise GeometryError("group weights must be non-negative")
        if abs(qa + qb - 1.0) > _WEIGHT_TOL:
            raise GeometryError("group weights must sum to 1")
    dirs = np.vstack([a.directions, b.directions])
    weights = np.concatenate([np.full(na, qa / na), np.full(nb, qb / nb)])
    groups = np.concatenate([np.zeros(na, dtype=int), np.ones(nb, dtype=int)])
    return canonicalize(MeasurementSet(dirs, weights, groups))


def with_group_weights(ms: MeasurementSet, group_weights: Sequence[float]) -> MeasurementSet:
    """Reassign the two group totals of a grouped set, keeping axis order."""
    if ms.groups is None:
        raise GeometryError("set carries no group labels")
    labels = np.unique(ms.groups)
    if labels.size != 2:
        raise GeometryError(f"need exactly two groups, found {labels.size}")
    qa, qb = (float(q) for q in group_weights)
    if qa < -_WEIGHT_TOL or qb < -_WEIGHT_TOL:
        raise GeometryError("group weights must be non-negative")
    if abs(qa + qb - 1.0) > _WEIGHT_TOL:
        raise GeometryError("group weights must sum to 1")
    na = int(np.sum(ms.groups == labels[0]))
    nb = ms.n - na
    weights = np.where(ms.groups == labels[0], max(qa, 0.0) / na, max(qb, 0.0) / nb)
    return MeasurementSet(ms.directions, weights, ms.groups)


def canonicalize(ms: MeasurementSet) -> MeasurementSet:
    """Sort axes into canonical order: group, then z, x, y descending."""
    d = ms.directions
    g = ms.groups if ms.groups is not None else np.zeros(ms.n, dtype=int)
    order = np.lexsort((-d[:, 1], -d[:, 0], -d[:, 2], g))
    groups = None if ms.groups is None else ms.groups[order]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DuplicateDirectionWarning)
        return MeasurementSet(d[order], ms.weights[order], groups)


def parameter_count(n: int) -> int:
    """Dimension of the gauge-fixed chart: 3n - 4."""
    return 3 * n - 4


def _frame(dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame with e3 along axis 0 and e1 toward axis 1.

    Falls back to later axes, then to a fixed lab axis, when the first two
    are collinear, so the chart stays total.
    """
    e3 = dirs[0]
    e1 = None
    for cand in list(dirs[1:]) + [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]:
        perp = cand - (cand @ e3) * e3
        nrm = float(np.linalg.norm(perp))
        if nrm > 1e-9:
            e1 = perp / nrm
            if cand @ e1 < 0.0:
                e1 = -e1
            break
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def to_parameters(ms: MeasurementSet) -> np.ndarray:
    """Gauge-fixed coordinates of a set: first axis pinned to +z, second to
    the x-z half plane with x >= 0, remaining axes as (theta, phi) pairs,
    then the first n-1 weights.
    """
    n = ms.n
    if n < 2:
        raise GeometryError("parameterization needs at least 2 axes")
    e1, e2, e3 = _frame(ms.directions)
    coords = np.empty(parameter_count(n))

    d2 = ms.directions[1]
    x2, z2 = float(d2 @ e1), float(d2 @ e3)
    if x2 < 0.0:  # the axis, not the stored representative, fixes the gauge
        x2 = -x2
        z2 = -z2
    coords[0] = math.atan2(x2, z2)

    for i in range(2, n):
        v = np.array([ms.directions[i] @ e1, ms.directions[i] @ e2, ms.directions[i] @ e3])
        if v[2] < 0.0 or (v[2] == 0.0 and (v[0] < 0.0 or (v[0] == 0.0 and v[1] < 0.0))):
            v = -v
        coords[1 + 2 * (i - 2)] = math.atan2(math.hypot(v[0], v[1]), v[2])
        coords[2 + 2 * (i - 2)] = math.atan2(v[1], v[0])

    coords[2 * n - 3 :] = ms.weights[:-1]
    return coords


def from_parameters(coords: Sequence[float] | np.ndarray, n: int) -> MeasurementSet:
    """Rebuild a weighted set from gauge-fixed coordinates.

    Raises InfeasibleParameters when the implied weights leave the simplex;
    search code treats that as a rejected point rather than an error.
    """
    if n < 2:
        raise GeometryError("parameterization needs at least 2 axes")
    v = np.asarray(coords, dtype=float).reshape(-1)
    if v.shape[0] != parameter_count(n):
        raise GeometryError(
            f"expected {parameter_count(n)} coordinates for n={n}, got {v.shape[0]}"
        )
    if not np.all(np.isfinite(v)):
        raise GeometryError("coordinates must be finite")

    dirs = np.empty((n, 3))
    dirs[0] = (0.0, 0.0, 1.0)
    t2 = v[0]
    dirs[1] = (math.sin(t2), 0.0, math.cos(t2))
    for i in range(2, n):
        theta, phi = v[1 + 2 * (i - 2)], v[2 + 2 * (i - 2)]
        st = math.sin(theta)
        dirs[i] = (st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    head = v[2 * n - 3 :]
    tail = 1.0 - float(head.sum())
    weights = np.append(head, tail)
    if np.any(weights < -_WEIGHT_TOL):
        raise InfeasibleParameters(
            f"weight coordinates leave the simplex (min {weights.min()!r})"
        )
    # clamping a -1e-12 tail can push the sum just past 1; renormalize
    weights = np.maximum(weights, 0.0)
    weights /= weights.sum()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DuplicateDirectionWarning)
        return MeasurementSet(dirs, weights)
