import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import rotate_set
from steerbound.geometry import (
    DuplicateDirectionWarning,
    GeometryError,
    InfeasibleParameters,
    MeasurementSet,
    canonical_axis,
    canonicalize,
    fingerprint,
    from_parameters,
    geodesic_union,
    parameter_count,
    platonic_set,
    to_parameters,
    with_group_weights,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class TestCanonicalAxis:
    def test_normalizes(self):
        v = canonical_axis([0.0, 0.0, 2.5])
        assert np.allclose(v, [0, 0, 1])

    def test_antipodes_collapse(self):
        u = np.array([0.3, -0.4, 0.5])
        assert np.array_equal(canonical_axis(u), canonical_axis(-u))

    def test_equator_tie_breaks(self):
        # z = 0 falls back to x > 0, then y > 0
        assert canonical_axis([-1.0, 0.2, 0.0])[0] > 0
        assert canonical_axis([0.0, -1.0, 0.0])[1] == 1.0

    def test_no_negative_zero(self):
        v = canonical_axis([0.0, 0.0, -1.0])
        assert str(v[0]) == "0.0" and str(v[1]) == "0.0"

    def test_zero_vector_rejected(self):
        with pytest.raises(GeometryError):
            canonical_axis([0.0, 0.0, 0.0])
        with pytest.raises(GeometryError):
            canonical_axis([np.inf, 0.0, 0.0])

    @given(
        st.tuples(
            st.floats(-10, 10, allow_nan=False),
            st.floats(-10, 10, allow_nan=False),
            st.floats(-10, 10, allow_nan=False),
        ).filter(lambda t: sum(x * x for x in t) > 1e-6)
    )
    def test_idempotent_unit_and_sign_invariant(self, t):
        v = canonical_axis(t)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12
        assert np.allclose(canonical_axis(v), v, atol=1e-15)
        assert np.allclose(canonical_axis([-x for x in t]), v, atol=1e-15)


class TestMeasurementSet:
    def test_weight_sum_enforced(self):
        with pytest.raises(GeometryError):
            MeasurementSet(np.eye(3), np.array([0.5, 0.5, 0.5]))

    def test_negative_weight_rejected(self):
        with pytest.raises(GeometryError):
            MeasurementSet(np.eye(3), np.array([1.2, -0.1, -0.1]))

    def test_length_mismatch(self):
        with pytest.raises(GeometryError):
            MeasurementSet(np.eye(3), np.array([0.5, 0.5]))
        with pytest.raises(GeometryError):
            MeasurementSet(np.eye(3), np.full(3, 1 / 3), groups=[0, 1])

    def test_near_duplicate_warns(self):
        dirs = np.array([[0, 0, 1], [1e-6, 0, 1], [1, 0, 0]], dtype=float)
        with pytest.warns(DuplicateDirectionWarning):
            MeasurementSet.equal_weighted(dirs)

    def test_rows_are_canonical(self, dod10):
        for row in dod10.directions:
            assert np.allclose(row, canonical_axis(row), atol=1e-15)

    def test_arrays_frozen(self, oct3):
        with pytest.raises(ValueError):
            oct3.directions[0, 0] = 5.0
        with pytest.raises(ValueError):
            oct3.weights[0] = 5.0

    def test_dict_roundtrip_with_groups(self, geo7):
        back = MeasurementSet.from_dict(geo7.to_dict())
        assert np.array_equal(back.directions, geo7.directions)
        assert np.array_equal(back.weights, geo7.weights)
        assert np.array_equal(back.groups, geo7.groups)

    def test_from_dict_checks_declared_n(self, oct3):
        data = oct3.to_dict()
        data["n"] = 7
        with pytest.raises(GeometryError):
            MeasurementSet.from_dict(data)


class TestPlatonicSets:
    def test_counts_and_weights(self):
        for n in (2, 3, 4, 6, 10):
            ms = platonic_set(n)
            assert ms.n == n
            assert np.allclose(ms.weights, 1.0 / n)

    def test_unknown_count_rejected(self):
        for n in (1, 5, 7, 12):
            with pytest.raises(GeometryError):
                platonic_set(n)

    def test_three_axes_orthogonal(self, oct3):
        assert np.allclose(oct3.directions @ oct3.directions.T, np.eye(3), atol=1e-15)

    def test_cube_diagonal_angles(self, cube4):
        g = np.abs(cube4.directions @ cube4.directions.T)
        off = g[~np.eye(4, dtype=bool)]
        assert np.allclose(off, 1.0 / 3.0, atol=1e-15)

    def test_icosahedron_angles(self, ico6):
        g = np.abs(ico6.directions @ ico6.directions.T)
        off = g[~np.eye(6, dtype=bool)]
        assert np.allclose(off, 1.0 / math.sqrt(5.0), atol=1e-12)

    def test_dodecahedron_angles(self, dod10):
        # vertex axes of the dodecahedron meet at cos = 1/3 or sqrt(5)/3
        g = np.abs(dod10.directions @ dod10.directions.T)
        off = np.sort(np.unique(np.round(g[~np.eye(10, dtype=bool)], 9)))
        assert np.allclose(off, [1.0 / 3.0, math.sqrt(5.0) / 3.0], atol=1e-9)

    def test_dodecahedron_sits_on_icosahedron_faces(self, ico6, dod10):
        """Each n=10 axis is a face centroid of the n=6 solid, so the union
        of the two is the expected 16-vertex geodesic arrangement."""
        verts = np.vstack([ico6.directions, -ico6.directions])
        adj = verts @ verts.T > 0.4  # neighbouring vertices share a face
        centroids = []
        for a in range(12):
            for b in range(a + 1, 12):
                for c in range(b + 1, 12):
                    if adj[a, b] and adj[a, c] and adj[b, c]:
                        m = verts[a] + verts[b] + verts[c]
                        centroids.append(m / np.linalg.norm(m))
        centroids = np.array(centroids)
        align = np.abs(dod10.directions @ centroids.T).max(axis=1)
        assert np.all(align > 1.0 - 1e-12)


class TestGeodesicUnion:
    def test_default_weights_uniform(self, geo7):
        assert geo7.n == 7
        assert np.allclose(geo7.weights, 1.0 / 7.0)
        assert sorted(np.bincount(geo7.groups)) == [3, 4]

    def test_membership(self, oct3, cube4, geo7):
        pool = np.vstack([oct3.directions, cube4.directions])
        hits = np.abs(geo7.directions @ pool.T) > 1.0 - 1e-12
        assert np.all(hits.sum(axis=1) == 1)

    def test_sixteen_axes_well_separated(self, geo16):
        assert geo16.n == 16
        g = np.abs(geo16.directions @ geo16.directions.T)
        np.fill_diagonal(g, 0.0)
        # closest pair is a vertex and an adjacent face centre
        assert g.max() == pytest.approx((GOLDEN + 1.0) / (math.sqrt(3.0) * math.hypot(1.0, GOLDEN)), abs=1e-12)

    def test_group_weights(self, oct3, cube4):
        ms = geodesic_union(oct3, cube4, (0.58, 0.42))
        w = np.where(ms.groups == 0, 0.58 / 3, 0.42 / 4)
        assert np.allclose(ms.weights, w)

    def test_bad_group_weights(self, oct3, cube4):
        with pytest.raises(GeometryError):
            geodesic_union(oct3, cube4, (0.7, 0.4))
        with pytest.raises(GeometryError):
            geodesic_union(oct3, cube4, (-0.1, 1.1))


class TestWithGroupWeights:
    def test_reassigns_totals(self, geo7):
        ms = with_group_weights(geo7, (0.2, 0.8))
        assert ms.weights[ms.groups == 0].sum() == pytest.approx(0.2, abs=1e-12)
        assert ms.weights[ms.groups == 1].sum() == pytest.approx(0.8, abs=1e-12)
        assert np.array_equal(ms.directions, geo7.directions)

    def test_boundary_weight_allowed(self, geo7):
        ms = with_group_weights(geo7, (0.0, 1.0))
        assert ms.weights[ms.groups == 0].sum() == 0.0

    def test_requires_groups(self, oct3):
        with pytest.raises(GeometryError):
            with_group_weights(oct3, (0.5, 0.5))
        with pytest.raises(GeometryError):
            with_group_weights(oct3, (0.7, 0.7))


def test_fingerprint_stability_and_sensitivity(geo7, oct3):
    again = geodesic_union(platonic_set(3), platonic_set(4))
    assert fingerprint(again) == fingerprint(geo7)
    reweighted = with_group_weights(geo7, (0.58, 0.42))
    assert fingerprint(reweighted) != fingerprint(geo7)
    assert fingerprint(oct3) != fingerprint(geo7)


def test_canonicalize_sorts_and_is_idempotent(rng):
    dirs = rng.normal(size=(5, 3))
    ms = MeasurementSet.equal_weighted(dirs)
    c = canonicalize(ms)
    assert fingerprint(canonicalize(c)) == fingerprint(c)
    keys = [tuple(-c.directions[i]) for i in range(5)]
    assert keys == sorted(keys, key=lambda t: (t[2], t[0], t[1]))
    # same axes, same weights, possibly new order
    match = np.abs(c.directions @ ms.directions.T) > 1 - 1e-12
    assert np.all(match.sum(axis=1) == 1)


class TestParameterChart:
    def test_parameter_count(self):
        assert parameter_count(2) == 2
        assert parameter_count(4) == 8
        assert parameter_count(7) == 17

    def test_roundtrip_preserves_shape(self, rng):
        for n in (2, 3, 5):
            dirs = rng.normal(size=(n, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            w = rng.dirichlet(np.ones(n))
            ms = MeasurementSet(dirs, w)
            back = from_parameters(to_parameters(ms), n)
            assert np.allclose(
                np.abs(back.directions @ back.directions.T),
                np.abs(ms.directions @ ms.directions.T),
                atol=1e-12,
            )
            assert np.allclose(back.weights, ms.weights, atol=1e-12)

    def test_roundtrip_is_rotation_invariant(self, cube4, rng):
        coords_a = to_parameters(cube4)
        coords_b = to_parameters(rotate_set(cube4, rng))
        # the chart quotients out the lab frame, up to axis ordering
        a = from_parameters(coords_a, 4)
        b = from_parameters(coords_b, 4)
        ga = np.sort(np.abs(a.directions @ a.directions.T).ravel())
        gb = np.sort(np.abs(b.directions @ b.directions.T).ravel())
        assert np.allclose(ga, gb, atol=1e-10)

    def test_first_axes_pinned(self, rng):
        coords = np.concatenate([[0.7], [1.1, 0.3], rng.dirichlet(np.ones(3))[:2]])
        ms = from_parameters(coords, 3)
        assert np.allclose(ms.directions[0], [0, 0, 1])
        assert ms.directions[1][1] == pytest.approx(0.0, abs=1e-15)
        assert ms.directions[1][0] >= 0

    def test_wrong_length_rejected(self):
        with pytest.raises(GeometryError):
            from_parameters(np.zeros(parameter_count(3) - 1), 3)

    def test_nonfinite_rejected(self):
        coords = np.zeros(parameter_count(3))
        coords[0] = np.nan
        with pytest.raises(GeometryError):
            from_parameters(coords, 3)

    def test_simplex_violations_are_infeasible(self):
        coords = np.zeros(parameter_count(3))
        coords[-2:] = (0.9, 0.4)  # tail weight would be -0.3
        with pytest.raises(InfeasibleParameters):
            from_parameters(coords, 3)

    def test_tiny_negative_tail_renormalized(self):
        coords = np.zeros(parameter_count(2))
        coords[0] = 1.0
        coords[-1] = 1.0 + 5e-13  # inside tolerance, tail clamps to zero
        ms = from_parameters(coords, 2)
        assert ms.weights.sum() == pytest.approx(1.0, abs=1e-15)
        assert ms.weights.min() >= 0.0

    @settings(max_examples=40)
    @given(st.data())
    def test_random_coordinates_build_valid_sets(self, data):
        n = data.draw(st.integers(2, 5))
        angles = data.draw(
            st.lists(
                st.floats(0, math.pi, allow_nan=False), min_size=2 * n - 3, max_size=2 * n - 3
            )
        )
        raw = data.draw(
            st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)
        )
        w = np.array(raw) / sum(raw)
        coords = np.concatenate([angles, w[:-1]])
        ms = from_parameters(coords, n)
        assert abs(ms.weights.sum() - 1.0) < 1e-12
        assert np.allclose(np.linalg.norm(ms.directions, axis=1), 1.0, atol=1e-12)
