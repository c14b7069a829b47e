import math

import numpy as np
import pytest

import weights
from errors import ConfigError, DomainError
from geometry import BoundaryCap, PseudoBall, Tent, lift
from sampling import Estimate, SamplerConfig


class Test_weight_families:
    def test_power_at_half(self):
        assert weights.eval_weight(weights.Power(1.0), np.array([0.5, 0.0])) == pytest.approx(0.5)

    def test_batch_evaluation(self):
        values = weights.eval_weight(weights.Power(2.0), np.array([[0.5], [0.0]]))
        assert values.tolist() == pytest.approx([0.25, 1.0])

    def test_outside_open_ball(self):
        with pytest.raises(DomainError):
            weights.eval_weight(weights.Power(1.0), np.array([1.0, 0.0]))

    def test_phi_single_piece_is_power(self):
        phi = weights.Phi(alpha=0.5)
        z = np.array([[0.75], [0.1]])
        assert np.allclose(phi.evaluate(z), weights.Power(0.5).evaluate(z))

    def test_phi_nonincreasing(self):
        phi = weights.Phi(alpha=0.5, direction="nonincreasing")
        assert phi.evaluate(np.array([[0.75]]))[0] == pytest.approx(2.0)

    def test_phi_pieces_are_continuous(self):
        phi = weights.Phi(pieces=((1.0, 0.5), (0.1, 1.0)))
        assert phi.alpha == 1.0
        assert phi.evaluate(np.array([[0.99]]))[0] == pytest.approx(0.1 ** 0.5 * 0.1)
        above = phi.evaluate(np.array([[0.9 - 1e-9]]))[0]
        below = phi.evaluate(np.array([[0.9 + 1e-9]]))[0]
        assert above == pytest.approx(below, rel=1e-6)

    def test_phi_rejects_bad_breakpoints(self):
        with pytest.raises(ConfigError):
            weights.Phi(pieces=((0.5, 1.0),))

    def test_phi_rejects_negative_exponent(self):
        with pytest.raises(ConfigError):
            weights.Phi(alpha=-0.5)

    def test_cap_power(self):
        w = weights.CapPower(2.0, np.array([1.0]))
        assert w.evaluate(np.array([[-1.0]]))[0] == pytest.approx(4.0)

    def test_product_and_power_of(self):
        w = weights.Product((weights.Power(1.0), weights.PowerOf(weights.Power(1.0), 2.0)))
        assert weights.eval_weight(w, np.array([0.5])) == pytest.approx(0.125)

    def test_lifted_reads_sphere_points(self):
        w = weights.Lifted(weights.Power(1.0))
        zeta = lift(np.array([0.5]), 0.3)
        assert weights.eval_weight(w, zeta) == pytest.approx(0.5)

    def test_constant_must_be_positive(self):
        with pytest.raises(ConfigError):
            weights.Constant(0.0)


class Test_regularized:
    def test_constant_is_fixed(self):
        w = weights.regularize(weights.Constant(2.0), 0.1, inner_samples=256)
        values = w.evaluate(np.array([[0.0], [0.5], [0.9 + 0.05j]]))
        assert np.allclose(values, 2.0)

    def test_deterministic(self):
        w = weights.regularize(weights.Power(0.5), 0.2, inner_samples=512, inner_seed=3)
        z = np.array([[0.3, 0.1j], [0.8, 0.0]])
        assert np.array_equal(w.evaluate(z), w.evaluate(z))

    def test_close_to_point_value_for_small_eps(self):
        w = weights.regularize(weights.Power(1.0), 0.01, inner_samples=2048)
        assert weights.eval_weight(w, np.array([0.5])) == pytest.approx(0.5, rel=0.05)

    def test_eps_range(self):
        with pytest.raises(ConfigError):
            weights.regularize(weights.Constant(1.0), 1.5)


class Test_induced:
    def test_constant_boundary_at_origin(self):
        w = weights.Induced(weights.Constant(1.0), inner_samples=128)
        assert weights.eval_weight(w, np.array([0.0])) == pytest.approx(1.0)

    def test_constant_boundary_near_boundary(self):
        # cap of half-width 2 asin(r / 2) with r = 1 - |z|^2
        w = weights.Induced(weights.Constant(1.0), inner_samples=128)
        co_sq = 1.0 - 0.9 ** 2
        expected = 2.0 * math.asin(co_sq / 2.0) / math.pi / co_sq
        assert weights.eval_weight(w, np.array([0.9])) == pytest.approx(expected)

    def test_aperture_must_be_positive(self):
        with pytest.raises(ConfigError):
            weights.Induced(weights.Constant(1.0), aperture=0.0)


class Test_weight_from_spec:
    def test_round_trip(self):
        w = weights.Product((weights.Power(0.5),
                             weights.regularize(weights.Phi(alpha=0.25), 0.1, 64, 2)))
        assert weights.weight_from_spec(w.to_spec()) == w

    def test_induced(self):
        spec = {"family": "induced", "aperture": 2.0,
                "boundary": {"family": "cap_power", "beta": 0.5, "center": [[1.0, 0.0]]}}
        w = weights.weight_from_spec(spec)
        assert isinstance(w, weights.Induced)
        assert w.aperture == 2.0
        assert w.boundary.beta == 0.5

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            weights.weight_from_spec({"family": "gaussian"})

    def test_missing_field(self):
        with pytest.raises(ConfigError):
            weights.weight_from_spec({"family": "power"})


class Test_brackets:
    def test_constant_weight_bracket_is_one(self):
        cfg = SamplerConfig(seed=1, samples=20000)
        region = PseudoBall(np.array([0.5, 0.0]), 0.1)
        bracket = weights.ap_bracket(weights.Constant(3.0), region, 2.0, cfg)
        assert bracket.value == pytest.approx(1.0, rel=1e-9)

    def test_bracket_is_at_least_one(self):
        cfg = SamplerConfig(seed=2, samples=20000)
        region = Tent(np.array([1.0]), 0.25)
        bracket = weights.ap_bracket(weights.Power(0.5), region, 3.0, cfg)
        assert bracket.value >= 1.0

    def test_p_must_exceed_one(self):
        with pytest.raises(ConfigError):
            weights.ap_bracket(weights.Constant(1.0), Tent(np.array([1.0]), 0.25), 1.0,
                               SamplerConfig(samples=100))

    def test_trace_stays_flat_inside_the_class(self):
        cfg = SamplerConfig(seed=3, samples=400000)
        trace = weights.bracket_trace(weights.Power(0.5), Tent(np.array([1.0]), 0.5), 2.0, cfg)
        assert trace.slope < weights.TRACE_SLOPE_THRESHOLD

    @pytest.mark.parametrize("alpha", [-1.25, 1.25])
    def test_trace_diverges_outside_the_class(self, alpha):
        cfg = SamplerConfig(seed=3, samples=400000)
        trace = weights.bracket_trace(weights.Power(alpha), Tent(np.array([1.0]), 0.5), 2.0, cfg)
        assert trace.slope > weights.TRACE_SLOPE_THRESHOLD

    def test_lifted_bracket_of_constant(self):
        cfg = SamplerConfig(seed=4, samples=20000)
        cap = BoundaryCap(lift(np.array([0.5]), 0.0), 0.2)
        bracket = weights.lifted_bracket(weights.Constant(1.0), cap, 2.0, cfg)
        assert bracket.value == pytest.approx(1.0, rel=1e-9)

    def test_lifted_caps_sit_over_the_point(self):
        caps = weights.lifted_caps(np.array([0.5]), 0.1)
        assert len(caps) == 2
        assert all(np.allclose(cap.center[:-1], 0.5) for cap in caps)


class Test_slopes:
    def test_fit_slope(self):
        assert weights.fit_slope([0, 1, 2], [1, 3, 5]) == pytest.approx(2.0)

    def test_pooled_slope_ignores_intercepts(self):
        slope, stderr = weights.pooled_slope([([0, 1, 2], [0, 2, 4]), ([0, 1, 2], [7, 9, 11])])
        assert slope == pytest.approx(2.0)
        assert stderr == pytest.approx(0.0, abs=1e-12)

    def test_pooled_slope_needs_steps(self):
        with pytest.raises(ConfigError):
            weights.pooled_slope([([1, 1], [0, 1])])

    def test_pooled_slope_of_one_sequence_is_the_plain_fit(self):
        xs, ys = [0, 1, 2, 3], [0.1, 1.0, 2.2, 2.9]
        slope, stderr = weights.pooled_slope([(xs, ys)])
        assert slope == pytest.approx(weights.fit_slope(xs, ys))
        assert stderr > 0.0

    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
    def test_tent_mass_slope_for_power_weight(self, n, alpha):
        cfg = SamplerConfig(seed=5, samples=200000)
        radii = [2.0 ** -j for j in range(4, 8)]
        zeta = np.zeros(n)
        zeta[0] = 1.0
        masses = [weights.tent_mass(weights.Power(alpha), Tent(zeta, r), cfg).value
                  for r in radii]
        slope = weights.fit_slope(np.log(radii), np.log(masses))
        assert slope == pytest.approx(n + 1.0 + alpha, abs=0.05)

    @pytest.mark.parametrize("n", [1, 2])
    def test_tau_fit_for_constant_weight(self, n):
        family = weights.RegionFamily(n=n, directions=2)
        fit = weights.tau_fit(weights.Constant(1.0), family, SamplerConfig(seed=6, samples=100000))
        assert fit.value == pytest.approx(n + 1.0, abs=0.05)
        assert fit.sequences == 2 * len(family.tau_radii)

    def test_tau_fit_ignores_interior_sequences(self, mocker):
        family = weights.RegionFamily(n=1, directions=1, tau_radii=(2.0 ** -8,), tau_steps=3)

        def mass(w, region, cfg):
            # boundary tents grow like R^2, interior balls like R
            power = 2.0 if region.kind == "tent" else 1.0
            return Estimate(region.radius ** power, 0.0, cfg.samples, cfg.seed)

        mocker.patch("weights.region_mass", side_effect=mass)
        fit = weights.tau_fit(weights.Constant(1.0), family, SamplerConfig(samples=10))
        assert fit.value == pytest.approx(2.0)
        assert fit.sequences == 1


class Test_region_family:
    def test_default_regions(self):
        family = weights.RegionFamily(n=2, seed=1)
        regions = family.regions()
        kinds = {region.kind for region in regions}
        assert kinds == {"pseudo_ball", "tent"}
        assert len(family.tent_regions()) == family.directions * len(family.radii)

    def test_regions_are_seeded(self):
        a = weights.RegionFamily(n=2, seed=1).balls()
        b = weights.RegionFamily(n=2, seed=1).balls()
        assert all(np.array_equal(x.center, y.center) for x, y in zip(a, b))

    def test_doubling_sequences_stay_in_range(self):
        with pytest.raises(ConfigError):
            weights.RegionFamily(tau_radii=(0.5,), tau_steps=4).doubling_sequences()

    def test_from_spec(self):
        family = weights.family_from_spec({"radii": [0.5, 0.25], "tents": False}, n=2, seed=9)
        assert family.radii == (0.5, 0.25)
        assert family.n == 2
        assert family.tent_regions() == []

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            weights.family_from_spec({"apertures": [1.0]})


class Test_predicted_class:
    def test_power(self):
        prediction = weights.predicted_class(weights.Power(0.5), 2.0, 1)
        assert prediction["bp"]
        assert prediction["tau"] == 2.5

    def test_power_outside_range(self):
        assert not weights.predicted_class(weights.Power(-1.5), 2.0, 1)["bp"]

    def test_phi_nonincreasing(self):
        prediction = weights.predicted_class(
            weights.Phi(alpha=0.5, direction="nonincreasing"), 2.0, 2)
        assert prediction["bp"]
        assert prediction["tau"] == 3.0

    def test_other_families(self):
        assert weights.predicted_class(weights.Constant(1.0), 2.0, 1) is None


class Test_class_certify:
    def trace(self, value, slope=0.0):
        return weights.BracketTrace(bracket=Estimate(value, 0.01 * value, 1000, 0),
                                    levels=[], slope=slope)

    def test_supported(self, mocker):
        mocker.patch("weights.bracket_trace", return_value=self.trace(1.0))
        mocker.patch("weights.tau_fit", return_value=weights.TauFit(2.0, 0.05, 2.0, 4))
        family = weights.RegionFamily(n=1, random_centers=0)
        report = weights.class_certify(weights.Constant(1.0), 2.0, family, SamplerConfig())
        assert set(report.verdicts.values()) == {weights.SUPPORTED}
        assert report.tau_target == 4.0
        assert report.bp_sup.value == 1.0
        assert report.to_dict()["prediction"] is None

    def test_large_bracket_refutes(self, mocker):
        mocker.patch("weights.bracket_trace", return_value=self.trace(100.0))
        mocker.patch("weights.tau_fit", return_value=weights.TauFit(2.0, 0.05, 2.0, 4))
        family = weights.RegionFamily(n=1, random_centers=0)
        report = weights.class_certify(weights.Power(-1.5), 2.0, family, SamplerConfig())
        assert report.verdicts["A_p"] == weights.REFUTED
        assert report.verdicts["B_p"] == weights.REFUTED
        assert not report.prediction["bp"]

    def test_diverging_trace_refutes(self, mocker):
        mocker.patch("weights.bracket_trace", return_value=self.trace(2.0, slope=0.3))
        mocker.patch("weights.tau_fit", return_value=weights.TauFit(2.0, 0.05, 2.0, 4))
        family = weights.RegionFamily(n=1, random_centers=0)
        report = weights.class_certify(weights.Constant(1.0), 2.0, family, SamplerConfig())
        assert report.verdicts["B_p"] == weights.REFUTED

    def test_large_doubling_exponent_refutes(self, mocker):
        mocker.patch("weights.bracket_trace", return_value=self.trace(1.0))
        mocker.patch("weights.tau_fit", return_value=weights.TauFit(6.0, 0.05, 6.0, 4))
        family = weights.RegionFamily(n=1, random_centers=0)
        report = weights.class_certify(weights.Constant(1.0), 2.0, family, SamplerConfig())
        assert report.verdicts["d_tau"] == weights.REFUTED
        assert report.verdicts["D_tau"] == weights.REFUTED

    def test_p_must_exceed_one(self):
        with pytest.raises(ConfigError):
            weights.class_certify(weights.Constant(1.0), 1.0, weights.RegionFamily(),
                                  SamplerConfig())


GRID = [np.array([0.0]), np.array([0.5]), np.array([0.9j]), np.array([0.99]),
        np.array([0.5, 0.3j]), np.array([0.0, 0.95])]


class Test_regularization_bands:
    @pytest.mark.parametrize("alpha", [-0.5, 0.5])
    def test_regularisations_are_equivalent(self, alpha):
        w = weights.Power(alpha)
        fine = weights.regularize(w, 0.1, inner_samples=512)
        coarse = weights.regularize(w, 0.2, inner_samples=512)
        for z in GRID:
            ratio = weights.eval_weight(fine, z) / weights.eval_weight(coarse, z)
            assert 1.0 / 8.0 <= ratio <= 8.0

    def test_regularising_twice(self):
        once = weights.regularize(weights.Power(0.5), 0.1, inner_samples=256)
        twice = weights.regularize(once, 0.1, inner_samples=256)
        for z in GRID:
            ratio = weights.eval_weight(twice, z) / weights.eval_weight(once, z)
            assert 1.0 / 8.0 <= ratio <= 8.0

    def test_regularized_power_is_stable_over_the_full_family(self):
        w = weights.regularize(weights.Power(0.5), 0.1, inner_samples=256)
        family = weights.RegionFamily(n=1, directions=1, shells=(0.0, 0.5, 0.9),
                                      radii=(0.25, 0.125, 0.0625, 0.03125), random_centers=0)
        sups = {}
        for index, region in enumerate(family.regions()):
            cfg = SamplerConfig(seed=50 + index, samples=4000)
            bracket = weights.ap_bracket(w, region, 2.0, cfg)
            sups[region.radius] = max(sups.get(region.radius, 0.0), bracket.value)
        assert max(sups.values()) < weights.BRACKET_THRESHOLD
        radii = sorted(sups)
        slope = weights.fit_slope([-math.log2(r) for r in radii],
                                  [math.log2(sups[r]) for r in radii])
        assert slope < weights.SCALE_SLOPE_THRESHOLD


class Test_class_properties:
    @pytest.mark.parametrize("z", [np.array([1.0]), np.array([0.5]), np.array([0.9])])
    @pytest.mark.parametrize("radius", [0.25, 0.0625])
    def test_lifted_bracket_matches_projected_ball(self, z, radius):
        w = weights.Power(0.5)
        cfg = SamplerConfig(seed=60, samples=40000)
        ball = weights.ap_bracket(w, PseudoBall(z, radius), 2.0, cfg)
        for cap in weights.lifted_caps(z, radius):
            ratio = weights.lifted_bracket(w, cap, 2.0, cfg).value / ball.value
            assert 1.0 / 16.0 <= ratio <= 16.0

    @pytest.mark.parametrize("region", [
        Tent(np.array([1.0]), 0.25),
        Tent(np.array([1.0]), 0.0625),
        PseudoBall(np.array([0.9]), 0.05),
        PseudoBall(np.array([0.5j]), 0.1),
    ])
    def test_induced_weight_of_constant_is_in_the_class(self, region):
        w = weights.Induced(weights.Constant(1.0), inner_samples=128)
        cfg = SamplerConfig(seed=61, samples=20000)
        bracket = weights.ap_bracket(w, region, 2.0, cfg)
        assert bracket.value == pytest.approx(1.0, rel=0.1)

    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.5])
    def test_bp_weights_double_below_the_critical_exponent(self, alpha):
        p, n = 2.0, 1
        family = weights.RegionFamily(n=n, directions=1, shells=(0.9,),
                                      radii=(0.25, 0.125, 0.0625, 0.03125),
                                      random_centers=0, tau_radii=(2.0 ** -8,))
        report = weights.class_certify(weights.Power(alpha), p, family,
                                       SamplerConfig(seed=62, samples=20000))
        if alpha == 0.0:
            assert report.verdicts["B_p"] == weights.SUPPORTED
        if report.verdicts["B_p"] == weights.SUPPORTED:
            assert report.tau.value <= p * (n + 1) + 0.1
