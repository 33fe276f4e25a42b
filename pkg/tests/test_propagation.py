import numpy as np
import pytest

from afcsim.comb import CombSpec, analytic_efficiency, comb_response, storage_time
from afcsim.errors import BandwidthError, TrainTooLongError, WindowOverlapError
from afcsim.fitting import fit
from afcsim.propagation import (
    ModeTrain,
    TemporalWaveform,
    build_train,
    echo_arrival_time,
    echo_efficiency,
    gaussian_pulse,
    hole_scan_match,
    mode_capacity,
    propagate,
    store_train,
)
from afcsim.spectral import ComplexResponse, FrequencyGrid, SpectralProfile

PULSE_FWHM = 320e-12
DT = 40e-12


def unity_response(span=40e9, n=4001):
    grid = FrequencyGrid(0.0, span, n)
    return ComplexResponse(grid, np.ones(n, complex))


def reference_comb(ts=90e-9, **kw):
    args = dict(finesse=2.0, peak_od=1.1, background_od=0.05)
    args.update(kw)
    return CombSpec.from_storage_time(ts, 8e9, **args)


@pytest.fixture(scope="module")
def comb_90ns_response():
    return comb_response(reference_comb(), points_per_tooth=16)


class TestWaveform:
    def test_energy(self):
        wave = TemporalWaveform(0.0, 1e-12, np.full(100, 2.0, complex))
        assert wave.energy == pytest.approx(4.0 * 100 * 1e-12, rel=1e-12)

    def test_nonpositive_dt_rejected(self):
        with pytest.raises(ValueError):
            TemporalWaveform(0.0, 0.0, np.ones(4, complex))

    def test_nonfinite_samples_rejected(self):
        with pytest.raises(ValueError):
            TemporalWaveform(0.0, 1e-12, np.array([1.0, np.inf], complex))


class TestPropagate:
    def test_unity_response_is_identity(self):
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, unity_response())
        n = len(pulse.samples)
        assert np.max(np.abs(out.samples[:n] - pulse.samples)) < 1e-10
        assert np.max(np.abs(out.samples[n:])) < 1e-10

    def test_output_window_is_power_of_two(self):
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, unity_response())
        n = len(out.samples)
        assert n & (n - 1) == 0

    def test_echo_arrives_at_storage_time(self, comb_90ns_response):
        spec = reference_comb()
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, comb_90ns_response)
        t = out.times
        p = np.abs(out.samples) ** 2
        m = (t > 2e-9 + 45e-9) & (t < 2e-9 + 135e-9)
        idx = np.flatnonzero(m)
        arrival = t[idx[np.argmax(p[idx])]] - 2e-9
        assert abs(arrival - storage_time(spec)) <= DT

    def test_echo_energy_matches_analytic_efficiency(self, comb_90ns_response):
        spec = reference_comb()
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, comb_90ns_response)
        eff = echo_efficiency(pulse, out, 2e-9 + storage_time(spec), 4 * PULSE_FWHM)
        assert eff == pytest.approx(analytic_efficiency(spec), rel=0.20)

    def test_energy_passivity(self, comb_90ns_response):
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, comb_90ns_response)
        assert out.energy <= pulse.energy * (1 + 1e-12)

    def test_linearity(self, comb_90ns_response):
        a = gaussian_pulse(PULSE_FWHM, 2e-9, 6e-9, DT)
        b = gaussian_pulse(2 * PULSE_FWHM, 4e-9, 6e-9, DT)
        combo = TemporalWaveform(0.0, DT, 0.7 * a.samples + 0.3j * b.samples)
        lhs = propagate(combo, comb_90ns_response).samples
        rhs = (0.7 * propagate(a, comb_90ns_response).samples
               + 0.3j * propagate(b, comb_90ns_response).samples)
        scale = np.max(np.abs(lhs))
        assert np.max(np.abs(lhs - rhs)) / scale < 1e-10

    def test_second_echo_weaker_than_first(self, comb_90ns_response):
        spec = reference_comb()
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)
        out = propagate(pulse, comb_90ns_response)
        ts = storage_time(spec)
        first = echo_efficiency(pulse, out, 2e-9 + ts, 4 * PULSE_FWHM)
        second = echo_efficiency(pulse, out, 2e-9 + 2 * ts, 4 * PULSE_FWHM)
        assert 0 < second < first

    def test_out_of_band_input_rejected(self):
        narrow = unity_response(span=1e9, n=201)
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 5e-9, DT)  # ~1.4 GHz wide
        with pytest.raises(BandwidthError):
            propagate(pulse, narrow)


class TestEchoEfficiency:
    def test_constructed_shifted_copy(self):
        eta = 0.42
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 40e-9, DT)
        shifted = np.roll(pulse.samples, int(round(20e-9 / DT))) * np.sqrt(eta)
        out = TemporalWaveform(0.0, DT, shifted)
        # 8x FWHM window holds the full Gaussian to rounding
        assert echo_efficiency(pulse, out, 22e-9, 8 * PULSE_FWHM) == \
            pytest.approx(eta, rel=1e-9)

    def test_zero_output_in_window(self):
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 40e-9, DT)
        out = TemporalWaveform(0.0, DT, np.zeros_like(pulse.samples))
        assert echo_efficiency(pulse, out, 22e-9, 4 * PULSE_FWHM) == 0.0

    def test_overlapping_windows_rejected(self):
        pulse = gaussian_pulse(PULSE_FWHM, 2e-9, 40e-9, DT)
        with pytest.raises(WindowOverlapError):
            echo_efficiency(pulse, pulse, 2.2e-9, 4 * PULSE_FWHM)


class TestEchoTiming:
    @pytest.mark.parametrize("ts", [10e-9, 100e-9])
    def test_arrival_within_one_grid_step(self, ts):
        spec = reference_comb(ts)
        resp = comb_response(spec, points_per_tooth=8)
        assert abs(echo_arrival_time(resp, DT) - ts) <= DT


class TestModeCapacity:
    def test_paper_capacity(self):
        assert mode_capacity(90e-9, 312.5e-12, 312.5e-12) == 144

    def test_detection_limited_configuration(self):
        assert mode_capacity(90e-9, 320e-12, 1.12e-9) == 62


class TestStoreTrain:
    @pytest.fixture(scope="class")
    def stored_59(self, comb_90ns_response):
        train = ModeTrain.uniform(59, PULSE_FWHM, 1.12e-9)
        return store_train(train, comb_90ns_response, echo_time=90e-9)

    def test_all_modes_recalled_in_order(self, stored_59):
        assert stored_59.order_preserved
        assert len(stored_59.per_mode_efficiency) == 59
        assert np.all(stored_59.per_mode_efficiency > 0)

    def test_cross_talk_below_minus_20_db(self, stored_59):
        assert stored_59.max_cross_talk_db() <= -20.0

    def test_efficiencies_uniform_across_modes(self, stored_59):
        eff = stored_59.per_mode_efficiency
        assert np.ptp(eff) / np.mean(eff) < 0.02

    def test_random_pattern_recalled_faithfully(self, comb_90ns_response):
        # coherent neighbor pedestals (-30 dB energy, so ~3% amplitude)
        # modulate recalled slot energies by a few percent even on a
        # noiseless field; the binary pattern itself is read back exactly
        rng = np.random.default_rng(8)
        pattern = (rng.random(76) < 0.5).astype(float)
        pattern[0] = 1.0
        train = ModeTrain(76, PULSE_FWHM, 1.12e-9, pattern)
        result = store_train(train, comb_90ns_response, echo_time=90e-9)
        corr = np.corrcoef(pattern**2, result.recalled_energies)[0, 1]
        assert corr > 0.995
        filled = result.recalled_energies[pattern > 0]
        empty = result.recalled_energies[pattern == 0]
        assert filled.min() > 10 * (empty.max() if empty.size else 0.0)
        assert result.order_preserved

    def test_train_longer_than_storage_rejected(self, comb_90ns_response):
        train = ModeTrain.uniform(120, PULSE_FWHM, 1.12e-9)
        with pytest.raises(TrainTooLongError):
            store_train(train, comb_90ns_response, echo_time=90e-9)

    def test_spacing_below_fwhm_rejected(self):
        with pytest.raises(ValueError):
            ModeTrain.uniform(4, 1e-9, 0.5e-9)

    def test_build_train_mode_positions(self):
        train = ModeTrain.uniform(3, 1e-9, 5e-9)
        wave = build_train(train, 0.1e-9, t_start=4e-9)
        t = wave.times
        p = np.abs(wave.samples) ** 2
        for k in range(3):
            window = np.abs(t - (4e-9 + 5e-9 * k)) < 2e-9
            idx = np.flatnonzero(window)
            peak = t[idx[np.argmax(p[idx])]]
            assert abs(peak - (4e-9 + 5e-9 * k)) < 0.2e-9


def narrow_emitter(fwhm=51.7e6, span=40e9, n=40001):
    grid = FrequencyGrid(0.0, span, n)
    half = fwhm / 2
    return SpectralProfile(grid, half**2 / (grid.values**2 + half**2))


class TestHoleScan:
    def test_delta_emitter_gives_plateau(self):
        grid = FrequencyGrid(0.0, 30e9, 3001)
        weight = np.zeros(3001)
        weight[1500] = 1.0
        emitter = SpectralProfile(grid, weight)
        offsets = np.linspace(-10e9, 10e9, 2001)
        scan = hole_scan_match(emitter, 8e9, offsets, background_od=1.1)
        base, peak = scan.min(), scan.max()
        assert base == pytest.approx(np.exp(-1.1), rel=1e-12)
        assert peak == pytest.approx(1.0, rel=1e-12)
        above = offsets[scan > (base + peak) / 2]
        assert (above.max() - above.min()) == pytest.approx(8e9, abs=2 * 10e-3 * 1e9)

    def test_zero_width_hole_gives_flat_baseline(self):
        emitter = narrow_emitter(n=2001, span=10e9)
        scan = hole_scan_match(emitter, 0.0, np.linspace(-4e9, 4e9, 41),
                               background_od=1.1)
        assert np.max(np.abs(scan - np.exp(-1.1))) < 1e-12

    def test_lorentzian_fit_of_scan(self):
        emitter = narrow_emitter(span=60e9, n=60001)
        offsets = np.linspace(-12e9, 12e9, 481)
        scan = hole_scan_match(emitter, 8e9, offsets, background_od=1.1)
        res = fit("lorentzian", offsets, scan, max_iterations=2000)
        assert 8.0e9 <= res["fwhm"] <= 8.2e9
