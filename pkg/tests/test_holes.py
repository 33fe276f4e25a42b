import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afcsim.errors import GridMismatchError
from afcsim.fitting import fit
from afcsim.holes import (
    PersistenceModel,
    PopulationState,
    PumpModel,
    burn,
    calibrate_pump_rate,
    decay,
    fresh_state,
    hole_area,
    population_to_od,
    serrodyne_spectrum,
)
from afcsim.spectral import FrequencyGrid, SpectralProfile

PERSISTENCE = PersistenceModel(w1=0.59, t1sa=6.75, w2=0.348, t1sb=385.0)


def narrow_pump(rate=50.0, width=4e6, homog=2e6, span=200e6, n=2001):
    grid = FrequencyGrid(0.0, span, n)
    weight = np.where(np.abs(grid.values) <= width / 2, 1.0, 0.0)
    return PumpModel(grid, weight, rate, homog)


def conservation_error(state):
    total = (state.ground_fraction + state.aux_fraction_class1
             + state.aux_fraction_class2)
    return float(np.max(np.abs(total - 1.0)))


class TestPersistenceModel:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            PersistenceModel(0.5, 100.0, 0.3, 10.0)

    def test_weights_bounded(self):
        with pytest.raises(ValueError):
            PersistenceModel(0.8, 1.0, 0.4, 10.0)

    def test_class_fractions_normalized(self):
        p1, p2 = PERSISTENCE.class_fractions
        assert p1 + p2 == pytest.approx(1.0, abs=1e-15)
        assert p1 / p2 == pytest.approx(0.59 / 0.348, rel=1e-12)


class TestBurn:
    def test_zero_rate_leaves_fresh_state_unchanged(self):
        pump = narrow_pump(rate=0.0)
        state = burn(fresh_state(pump.grid), pump, PERSISTENCE, 0.120)
        assert np.all(state.ground_fraction == 1.0)

    def test_calibrated_saturation_reaches_target_transfer(self):
        # saturated narrow burn leaving 14% ground population at the center,
        # so the transmitted hole depth is 86% of the peak OD
        pump = narrow_pump()
        rate = calibrate_pump_rate(pump, PERSISTENCE, 0.120, target_ground=0.14)
        strong = PumpModel(pump.grid, pump.pump_spectrum, rate,
                           pump.homogeneous_width)
        state = burn(fresh_state(pump.grid), strong, PERSISTENCE, 0.120)
        center = np.argmax(strong.rate_profile())
        assert state.ground_fraction[center] == pytest.approx(0.14, abs=1e-6)

        reference = SpectralProfile(pump.grid, np.full(pump.grid.n_points, 1.1))
        od = population_to_od(state, reference)
        assert od.od[center] == pytest.approx(0.154, abs=2e-6)

    def test_rate_profile_matches_brute_force_convolution(self):
        # direct O(n^2) convolution oracle on a small grid
        grid = FrequencyGrid(0.0, 40e6, 401)
        weight = np.where(np.abs(grid.values) <= 8e6 / 2, 1.0, 0.0)
        homog = 3e6
        pump = PumpModel(grid, weight, 10.0, homog)
        profile = pump.rate_profile()

        dnu = grid.spacing
        half = homog / 2
        m = int(np.ceil(20 * half / dnu))
        x = np.arange(-m, m + 1) * dnu
        kernel = half / (np.pi * (x**2 + half**2))
        kernel = kernel / kernel.sum()
        oracle = np.zeros_like(weight)
        for i in range(len(weight)):
            for j, k in enumerate(kernel):
                src = i - (j - m)
                if 0 <= src < len(weight):
                    oracle[i] += k * weight[src]
        assert np.max(np.abs(profile - 10.0 * oracle)) < 1e-9

    def test_smearing_broadens_the_hole(self):
        pump = narrow_pump(width=8e6, homog=3e6)
        rate = pump.rate_profile()
        above = pump.grid.values[rate > rate.max() / 2]
        assert (above.max() - above.min()) > 8e6

    def test_burn_monotone_in_duration(self):
        pump = narrow_pump(rate=20.0)
        durations = np.linspace(0.01, 0.6, 12)
        previous = None
        for d in durations:
            state = burn(fresh_state(pump.grid), pump, PERSISTENCE, d)
            if previous is not None:
                assert np.all(state.ground_fraction <= previous + 1e-12)
            previous = state.ground_fraction

    @given(rate=st.floats(0.0, 1e6), duration=st.floats(1e-4, 10.0))
    @settings(max_examples=40, deadline=None)
    def test_population_conserved(self, rate, duration):
        pump = narrow_pump(rate=rate, n=201)
        state = burn(fresh_state(pump.grid), pump, PERSISTENCE, duration)
        assert conservation_error(state) < 1e-12

    def test_grid_mismatch_rejected(self):
        pump = narrow_pump()
        other = fresh_state(FrequencyGrid(0.0, 100e6, 501))
        with pytest.raises(GridMismatchError):
            burn(other, pump, PERSISTENCE, 0.1)


def split_state(grid, depth_shape):
    """Population state whose depleted population follows the persistence
    weights exactly (the generative model of the decay examples)."""
    a1 = PERSISTENCE.w1 * depth_shape
    a2 = PERSISTENCE.w2 * depth_shape
    return PopulationState(grid, 1.0 - a1 - a2, a1, a2)


class TestDecay:
    def test_zero_wait_is_identity(self):
        pump = narrow_pump()
        state = burn(fresh_state(pump.grid), pump, PERSISTENCE, 0.12)
        after = decay(state, PERSISTENCE, 0.0)
        assert np.array_equal(after.ground_fraction, state.ground_fraction)

    def test_area_ratio_matches_direct_model_evaluation(self):
        # oracle: A(t) = w1 exp(-t/t1sa) + w2 exp(-t/t1sb), evaluated directly
        grid = FrequencyGrid(0.0, 100e6, 801)
        shape = np.where(np.abs(grid.values) <= 4e6, 1.0, 0.0)
        state = split_state(grid, shape)
        ref = hole_area(decay(state, PERSISTENCE, 0.050))
        later = hole_area(decay(state, PERSISTENCE, 6.75))
        w1, w2 = PERSISTENCE.w1, PERSISTENCE.w2
        oracle = ((w1 * np.exp(-1.0) + w2 * np.exp(-6.75 / 385.0))
                  / (w1 * np.exp(-0.05 / 6.75) + w2 * np.exp(-0.05 / 385.0)))
        assert later / ref == pytest.approx(oracle, rel=1e-12)
        assert later / ref == pytest.approx(0.59876, abs=1e-5)

    def test_full_refill_at_long_wait(self):
        grid = FrequencyGrid(0.0, 100e6, 101)
        state = split_state(grid, np.full(101, 0.9))
        after = decay(state, PERSISTENCE, 1e6)
        assert np.all(after.ground_fraction > 1 - 1e-9)
        assert np.all(after.aux_fraction_class1 < 1e-9)

    @given(t1=st.floats(0.0, 500.0), t2=st.floats(0.0, 500.0))
    @settings(max_examples=40, deadline=None)
    def test_semigroup_property(self, t1, t2):
        grid = FrequencyGrid(0.0, 10e6, 41)
        state = split_state(grid, np.full(41, 0.8))
        one = decay(state, PERSISTENCE, t1 + t2)
        two = decay(decay(state, PERSISTENCE, t1), PERSISTENCE, t2)
        assert np.array_equal(one.aux_fraction_class1, two.aux_fraction_class1) or \
            np.max(np.abs(one.aux_fraction_class1 - two.aux_fraction_class1)) < 1e-15
        assert conservation_error(one) < 1e-12

    def test_decay_curve_refit_recovers_parameters(self):
        # round trip through the fitting module: all four within 2%
        grid = FrequencyGrid(0.0, 100e6, 201)
        state = split_state(grid, np.where(np.abs(grid.values) <= 4e6, 1.0, 0.0))
        waits = np.geomspace(0.05, 1800.0, 30)
        center = grid.n_points // 2
        depletion = np.array([
            (lambda s: s.aux_fraction_class1[center] + s.aux_fraction_class2[center])(
                decay(state, PERSISTENCE, w))
            for w in waits
        ])
        res = fit("biexponential", waits, depletion)
        assert res["w1"] == pytest.approx(PERSISTENCE.w1, rel=0.02)
        assert res["t1"] == pytest.approx(PERSISTENCE.t1sa, rel=0.02)
        assert res["w2"] == pytest.approx(PERSISTENCE.w2, rel=0.02)
        assert res["t2"] == pytest.approx(PERSISTENCE.t1sb, rel=0.02)


class TestPopulationToOd:
    def test_unit_ground_returns_reference(self):
        grid = FrequencyGrid(0.0, 10e6, 11)
        ref = SpectralProfile(grid, np.linspace(0, 1.1, 11))
        od = population_to_od(fresh_state(grid), ref)
        assert np.array_equal(od.od, ref.od)

    def test_zero_ground_gives_full_transparency(self):
        grid = FrequencyGrid(0.0, 10e6, 11)
        state = PopulationState(grid, np.zeros(11), 0.6 * np.ones(11),
                                0.4 * np.ones(11))
        ref = SpectralProfile(grid, np.full(11, 1.1))
        assert np.all(population_to_od(state, ref).od == 0.0)

    def test_grid_mismatch_rejected(self):
        grid = FrequencyGrid(0.0, 10e6, 11)
        other = FrequencyGrid(0.0, 20e6, 11)
        ref = SpectralProfile(other, np.full(11, 1.1))
        with pytest.raises(GridMismatchError):
            population_to_od(fresh_state(grid), ref)


class TestSerrodyne:
    def test_ideal_ramp_moves_all_power_to_first_order(self):
        result = serrodyne_spectrum(1e6, 2 * np.pi, 4096)
        assert result.power(1) == pytest.approx(1.0, abs=1e-6)
        for order in (-3, -2, -1, 0, 2, 3):
            assert result.power(order) < 1e-6

    def test_zero_amplitude_keeps_carrier(self):
        result = serrodyne_spectrum(1e6, 0.0, 1024)
        assert result.power(0) == pytest.approx(1.0, abs=1e-12)

    def test_partial_ramp_matches_closed_form(self):
        # |c_n|^2 = sinc^2((A - 2 pi n) / 2) for a linear 0->A phase ramp
        amp = 0.9 * 2 * np.pi
        result = serrodyne_spectrum(1e6, amp, 8192)
        for order in range(-3, 4):
            z = (amp - 2 * np.pi * order) / 2
            oracle = (np.sin(z) / z) ** 2 if z != 0 else 1.0
            assert result.power(order) == pytest.approx(oracle, rel=1e-3, abs=1e-9)

    def test_suppression_reported_relative_to_first_order(self):
        result = serrodyne_spectrum(1e6, 0.9 * 2 * np.pi, 8192)
        assert result.carrier_suppression_db < -15
        assert result.negative_first_suppression_db < -20

    @given(st.floats(0.0, 4 * np.pi))
    @settings(max_examples=50, deadline=None)
    def test_reported_powers_never_exceed_unity(self, amp):
        result = serrodyne_spectrum(1e6, amp, 512)
        assert sum(result.powers) <= 1 + 1e-9

    def test_minimum_samples_enforced(self):
        with pytest.raises(ValueError):
            serrodyne_spectrum(1e6, 1.0, 8)
