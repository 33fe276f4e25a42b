import numpy as np
import pytest

from afcsim.comb import (
    CombSpec,
    analytic_efficiency,
    comb_metrics,
    comb_response,
    storage_time,
    synthesize,
)
from afcsim.errors import PeriodicityError, ResolutionError
from afcsim.spectral import FrequencyGrid, SpectralProfile


def spec_30ns(**kw):
    args = dict(finesse=2.0, peak_od=1.1, background_od=0.05)
    args.update(kw)
    return CombSpec.from_storage_time(30e-9, 8e9, **args)


class TestCombSpec:
    def test_tooth_count_from_bandwidth(self):
        spec = CombSpec(33.33e6, 33.33e6 * 240, 2.0, 1.1, 0.05)
        assert spec.n_teeth == 240

    def test_eight_ghz_comb_has_240_teeth_at_30ns(self):
        assert spec_30ns().n_teeth == 240

    def test_non_integer_bandwidth_ratio_rejected(self):
        with pytest.raises(ValueError):
            CombSpec(33.33e6, 8e9, 2.0, 1.1, 0.05)

    def test_single_tooth_rejected(self):
        with pytest.raises(ValueError):
            CombSpec(1e9, 1e9, 2.0, 1.1)

    def test_finesse_below_one_rejected(self):
        with pytest.raises(ValueError):
            CombSpec(1e8, 1e9, 0.5, 1.1)

    def test_background_exceeding_peak_rejected(self):
        with pytest.raises(ValueError):
            CombSpec(1e8, 1e9, 2.0, 0.5, background_od=0.6)


class TestStorageTime:
    @pytest.mark.parametrize("ts", [5e-9, 30e-9, 90e-9, 100e-9])
    def test_reciprocal_identity(self, ts):
        spec = CombSpec.from_storage_time(ts, 8e9, finesse=2.0, peak_od=1.1,
                                          background_od=0.05)
        assert storage_time(spec) * spec.tooth_spacing == 1.0

    def test_paper_examples(self):
        assert storage_time(spec_30ns()) == pytest.approx(30e-9, rel=1e-12)
        s90 = CombSpec.from_storage_time(90e-9, 8e9, finesse=2.0, peak_od=1.1)
        assert storage_time(s90) == pytest.approx(90e-9, rel=1e-12)
        s5 = CombSpec(200e6, 8e9, 2.0, 1.1)
        assert storage_time(s5) == pytest.approx(5e-9, rel=1e-12)


class TestAnalyticEfficiency:
    def test_reference_comb(self):
        # (d/F)^2 exp(-d/F) sinc^2(pi/F) exp(-d0) at d=1.1, F=2, d0=0.05
        assert analytic_efficiency(spec_30ns()) == pytest.approx(0.0673, abs=5e-4)

    def test_no_background(self):
        spec = spec_30ns(background_od=0.0)
        assert analytic_efficiency(spec) == pytest.approx(0.0707, abs=5e-4)

    def test_vanishing_od_gives_zero(self):
        spec = CombSpec(33.33e6, 33.33e6 * 240, 2.0, 1e-12, 0.0)
        assert analytic_efficiency(spec) < 1e-20

    def test_maximum_at_interior_finesse(self):
        f_scan = np.linspace(1.0, 20.0, 96)
        eta = [analytic_efficiency(CombSpec(1e8, 1e9, f, 1.1, 0.05)) for f in f_scan]
        k = int(np.argmax(eta))
        assert 0 < k < len(f_scan) - 1


def fine_grid(spec, points_per_tooth=24, span_factor=1.25, n_offset=1):
    step = spec.tooth_width / points_per_tooth
    span = span_factor * spec.bandwidth
    return FrequencyGrid(spec.center_offset, span, int(round(span / step)) + n_offset)


class TestSynthesize:
    def test_square_teeth_are_two_level(self):
        spec = spec_30ns()
        profile = synthesize(spec, fine_grid(spec))
        near_peak = np.abs(profile.od - spec.peak_od) < 1e-9
        near_bg = np.abs(profile.od - spec.background_od) < 1e-9
        assert np.all(near_peak | near_bg)

    def test_degenerate_finesse_merges_teeth(self):
        spec = spec_30ns(finesse=1.0)
        grid = fine_grid(spec, points_per_tooth=12)
        profile = synthesize(spec, grid)
        inband = np.abs(grid.values) < spec.bandwidth / 2 - spec.tooth_spacing
        assert np.all(np.abs(profile.od[inband] - spec.peak_od) < 1e-9)

    def test_untailored_outside_band(self):
        spec = spec_30ns()
        grid = fine_grid(spec, span_factor=2.0)
        profile = synthesize(spec, grid)
        outside = np.abs(grid.values) > spec.bandwidth / 2 + spec.tooth_spacing
        assert np.all(profile.od[outside] == spec.peak_od)

    def test_underresolved_grid_rejected(self):
        spec = spec_30ns()
        with pytest.raises(ResolutionError):
            synthesize(spec, FrequencyGrid(0.0, 9e9, 1000))

    def test_gaussian_teeth_capped_at_peak(self):
        spec = spec_30ns(tooth_shape="gaussian")
        profile = synthesize(spec, fine_grid(spec))
        assert np.max(profile.od) <= spec.peak_od + 1e-12
        assert np.min(profile.od) >= spec.background_od - 1e-12


class TestCombMetrics:
    @pytest.mark.parametrize("shape", ["square", "gaussian"])
    @pytest.mark.parametrize("n_teeth,finesse", [(16, 2.0), (48, 3.0)])
    def test_round_trip_within_one_percent(self, shape, n_teeth, finesse):
        spacing = 33.33e6
        spec = CombSpec(spacing, spacing * n_teeth, finesse, 1.1, 0.05,
                        tooth_shape=shape)
        profile = synthesize(spec, fine_grid(spec, points_per_tooth=24, n_offset=8))
        m = comb_metrics(profile)
        assert m.tooth_spacing == pytest.approx(spec.tooth_spacing, rel=0.01)
        assert m.finesse == pytest.approx(spec.finesse, rel=0.01)
        assert m.peak_od == pytest.approx(spec.peak_od, rel=0.01)
        assert m.background_od == pytest.approx(spec.background_od, abs=0.01 * spec.peak_od)
        assert m.bandwidth == pytest.approx(spec.bandwidth, rel=0.01)
        assert m.n_teeth == n_teeth

    def test_flat_profile_has_no_periodicity(self):
        grid = FrequencyGrid(0.0, 1e9, 256)
        with pytest.raises(PeriodicityError):
            comb_metrics(SpectralProfile(grid, np.full(256, 0.7)))

    def test_burned_comb_background_od(self):
        # end-to-end: comb-shaped pump through the rate model, then grade
        from afcsim import holes

        spec = CombSpec.from_storage_time(30e-9, 2e9, finesse=2.0, peak_od=1.1,
                                          background_od=0.05)
        grid = fine_grid(spec, points_per_tooth=12, span_factor=1.3)
        ideal = synthesize(spec, grid)
        weight = np.where(np.abs(grid.values) <= spec.bandwidth / 2,
                          (spec.peak_od - ideal.od) / (spec.peak_od - spec.background_od),
                          0.0)
        persistence = holes.PersistenceModel(0.59, 6.75, 0.348, 385.0)
        probe = holes.PumpModel(grid, weight, 1.0, 1e6)
        rate = holes.calibrate_pump_rate(probe, persistence, 0.120,
                                         target_ground=0.05 / 1.1)
        pump = holes.PumpModel(grid, weight, rate, 1e6)
        state = holes.decay(
            holes.burn(holes.fresh_state(grid), pump, persistence, 0.120),
            persistence, 0.180)
        reference = SpectralProfile(grid, np.full(grid.n_points, 1.1))
        burned = holes.population_to_od(state, reference)
        m = comb_metrics(burned)
        assert m.background_od <= 0.1
        assert m.tooth_spacing == pytest.approx(spec.tooth_spacing, rel=0.02)


def test_comb_response_resolves_and_pads():
    spec = spec_30ns()
    resp = comb_response(spec, points_per_tooth=8)
    assert resp.grid.span >= 4 * spec.bandwidth
    assert resp.grid.spacing <= spec.tooth_width / 8
    assert np.all(np.abs(resp.amplitude_transfer) <= 1 + 1e-12)
