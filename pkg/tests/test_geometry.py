import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import geometry
from errors import DomainError, InputError


@st.composite
def ball_points(draw, n=2, cap=0.99):
    parts = draw(st.lists(st.floats(-1.0, 1.0), min_size=2 * n, max_size=2 * n))
    z = np.array([complex(parts[2 * i], parts[2 * i + 1]) for i in range(n)])
    norm = math.sqrt(float(geometry.norm_sq(z)))
    radius = draw(st.floats(0.0, cap))
    if norm == 0.0:
        return np.zeros(n, dtype=complex)
    return z / norm * radius


class Test_rho:
    @settings(max_examples=200)
    @given(ball_points(), ball_points())
    def test_symmetric(self, z, w):
        assert geometry.rho(z, w) == geometry.rho(w, z)

    @settings(max_examples=200)
    @given(ball_points())
    def test_zero_on_diagonal(self, z):
        assert geometry.rho(z, z) == pytest.approx(0.0, abs=1e-12)

    def test_origin_to_boundary_is_one(self):
        assert geometry.rho(np.zeros(2), np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_boundary_points_on_the_closed_ball(self):
        zeta = np.array([1.0, 0.0])
        eta = np.array([0.0, 1.0])
        assert geometry.rho(zeta, eta) == pytest.approx(1.0)

    @settings(max_examples=200)
    @given(ball_points(cap=0.999), ball_points(cap=0.999))
    def test_factorization(self, z, w):
        distance = geometry.rho(z, w)
        c = abs(1.0 - geometry.inner(z, w))
        co = math.sqrt((1.0 - geometry.norm_sq(z)) * (1.0 - geometry.norm_sq(w)))
        phi = geometry.mobius(z, w)
        assert distance * (1.0 + co / c) == pytest.approx(
            c * geometry.norm_sq(phi), abs=1e-9)

    @settings(max_examples=300)
    @given(ball_points(), ball_points(), ball_points())
    def test_quasi_triangle(self, z, w, u):
        assert geometry.rho(z, w) <= 4.0 * (geometry.rho(z, u) + geometry.rho(u, w)) + 1e-12

    def test_is_infimum_over_lifts(self):
        z = np.array([0.3 + 0.2j, -0.1j])
        w = np.array([-0.4, 0.5 + 0.1j])
        theta = np.linspace(0.0, 2.0 * math.pi, 4001)
        lifts = np.abs(1.0 - geometry.inner(geometry.lift(z, theta), geometry.lift(w, 0.0)))
        assert geometry.rho(z, w) == pytest.approx(lifts.min(), abs=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            geometry.rho(np.zeros(2), np.zeros(3))

    def test_point_outside_ball(self):
        with pytest.raises(DomainError):
            geometry.rho(np.array([1.5, 0.0]), np.zeros(2))


class Test_mobius:
    @settings(max_examples=200)
    @given(ball_points(), ball_points())
    def test_involution(self, a, z):
        back = geometry.mobius(a, geometry.mobius(a, z))
        assert np.allclose(back, z, atol=1e-9)

    @settings(max_examples=200)
    @given(ball_points(), ball_points())
    def test_identity(self, a, z):
        phi = geometry.mobius(a, z)
        lhs = (1.0 - geometry.norm_sq(phi)) * abs(1.0 - geometry.inner(z, a)) ** 2
        rhs = (1.0 - geometry.norm_sq(a)) * (1.0 - geometry.norm_sq(z))
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_swaps_center_and_origin(self):
        a = np.array([0.5, 0.25j])
        assert np.allclose(geometry.mobius(a, a), 0.0)
        assert np.allclose(geometry.mobius(a, np.zeros(2)), a)

    def test_origin_center_is_minus_identity(self):
        z = np.array([0.1, 0.2 - 0.3j])
        assert np.allclose(geometry.mobius(np.zeros(2), z), -z)

    def test_center_on_sphere_rejected(self):
        with pytest.raises(DomainError):
            geometry.mobius(np.array([1.0, 0.0]), np.zeros(2))

    def test_batches(self):
        a = np.array([[0.5, 0.0], [0.0, 0.5j]])
        z = np.array([[0.1, 0.1], [0.2, -0.2]])
        batch = geometry.mobius(a, z)
        assert np.allclose(batch[1], geometry.mobius(a[1], z[1]))


class Test_lift_and_project:
    def test_lift_lands_on_sphere(self):
        z = np.array([0.3, 0.4j])
        zeta = geometry.lift(z, 1.2)
        assert geometry.norm_sq(zeta) == pytest.approx(1.0)
        assert np.allclose(geometry.project(zeta), z)

    def test_lift_broadcasts_angles(self):
        zeta = geometry.lift(np.array([0.5]), np.array([0.0, math.pi]))
        assert zeta.shape == (2, 2)

    def test_project_needs_unit_norm(self):
        with pytest.raises(InputError):
            geometry.project(np.array([0.5, 0.5]))


class Test_frames:
    @settings(max_examples=100)
    @given(ball_points(n=3))
    def test_frame_is_unitary_and_aligns(self, x):
        frame = geometry.unitary_frame(x)
        assert np.allclose(frame @ frame.conj().T, np.eye(3), atol=1e-12)
        local = geometry.to_frame(x, x)
        assert local[0] == pytest.approx(math.sqrt(geometry.norm_sq(x)), abs=1e-12)
        assert np.allclose(local[1:], 0.0, atol=1e-12)

    def test_round_trip(self):
        x = np.array([0.2j, -0.5, 0.1])
        w = np.array([0.3, 0.1 + 0.1j, -0.2j])
        assert np.allclose(geometry.from_frame(x, geometry.to_frame(x, w)), w)


class Test_regions:
    def test_pseudo_ball_contains_center(self):
        ball = geometry.PseudoBall(np.array([0.9, 0.0]), 0.01)
        assert geometry.region_contains(ball, ball.center)

    def test_polydisk_volume(self):
        polydisk = geometry.Polydisk(np.array([0.5, 0.0]), 0.01)
        a, b = polydisk.radii
        assert a == pytest.approx(0.01 + 0.1 * math.sqrt(0.75))
        assert b == pytest.approx(0.1)
        assert geometry.polydisk_volume(polydisk) == pytest.approx(2 * a * a * b * b)

    def test_enclosures(self):
        ball = geometry.PseudoBall(np.array([0.5]), 0.1)
        assert geometry.enclosing_polydisk(ball).radius == pytest.approx(0.9)
        tent = geometry.Tent(np.array([1.0]), 0.1)
        assert geometry.enclosing_polydisk(tent).radius == pytest.approx(0.2)

    def test_tent_contains(self):
        tent = geometry.Tent(np.array([1.0, 0.0]), 0.1)
        inside = geometry.region_contains(tent, np.array([[0.95, 0.0], [0.0, 0.95]]))
        assert inside.tolist() == [True, False]

    def test_touches_boundary(self):
        assert geometry.touches_boundary(np.array([0.95]), 0.1)
        assert not geometry.touches_boundary(np.array([0.5]), 0.1)
        assert not geometry.touches_boundary(np.zeros(2), 0.5)

    def test_non_positive_radius(self):
        with pytest.raises(InputError):
            geometry.PseudoBall(np.zeros(1), 0.0)

    def test_tent_center_on_sphere(self):
        with pytest.raises(InputError):
            geometry.Tent(np.array([0.5]), 0.1)

    def test_spec_round_trip(self):
        ball = geometry.PseudoBall(np.array([0.25 - 0.5j]), 0.125)
        back = geometry.region_from_spec(geometry.region_to_spec(ball))
        assert back.kind == "pseudo_ball"
        assert back.radius == 0.125
        assert np.allclose(back.center, ball.center)

    def test_volume_at_origin(self):
        assert geometry.pseudo_ball_volume_at_origin(0.5, 2) == pytest.approx(0.75 ** 2)
