"""Bundled reproduction scenarios: each wires several modules into one named
experiment, writes CSV artifacts and an optional SVG, and returns a flat
dict of scalar figures of merit for results.json.

Every stochastic scenario draws all randomness from the configured seed, so
repeated runs produce byte-identical results.
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from . import coherence, counting, fitting, holes, sequencer, svgplot
from .comb import CombSpec, analytic_efficiency, comb_metrics, comb_response, storage_time, synthesize
from .errors import ConfigError
from .propagation import (
    ModeTrain,
    build_train,
    echo_efficiency,
    gaussian_pulse,
    hole_scan_match,
    mode_capacity,
    propagate,
    store_train,
)
from .spectral import (
    FrequencyGrid,
    SpectralProfile,
    beer_lambert_transmission,
    extract_od,
    save_spectrum_csv,
)

__all__ = ["SCENARIOS", "Scenario", "load_config", "run_scenario"]


class Scenario:
    """Parsed scenario configuration with typed, path-reporting accessors."""

    def __init__(self, parser: configparser.ConfigParser, path: str):
        self._cp = parser
        self.path = path
        self.name = self.get_str("scenario", "name")
        self.seed = self.get_int("scenario", "seed", default=0)

    def _raw(self, section: str, key: str, default, required: bool):
        if not self._cp.has_option(section, key):
            if required:
                raise ConfigError(f"{self.path}: missing [{section}] {key}")
            return None
        return self._cp.get(section, key)

    def get_str(self, section: str, key: str, default: str | None = None) -> str:
        v = self._raw(section, key, default, default is None)
        return default if v is None else v.strip()

    def get_float(self, section: str, key: str, default: float | None = None) -> float:
        v = self._raw(section, key, default, default is None)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{self.path}: [{section}] {key} = {v!r} is not a number") from None

    def get_int(self, section: str, key: str, default: int | None = None) -> int:
        v = self._raw(section, key, default, default is None)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{self.path}: [{section}] {key} = {v!r} is not an integer") from None

    def get_floats(self, section: str, key: str) -> list[float]:
        v = self._raw(section, key, None, True)
        try:
            return [float(tok) for tok in v.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"{self.path}: [{section}] {key} = {v!r} is not a number list") from None


def load_config(path) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    if not parser.has_section("scenario"):
        raise ConfigError(f"{path}: missing [scenario] section")
    return Scenario(parser, str(path))


def _comb_from_cfg(cfg: Scenario) -> CombSpec:
    return CombSpec.from_storage_time(
        cfg.get_float("comb", "storage_time_s"),
        cfg.get_float("comb", "bandwidth_hz"),
        finesse=cfg.get_float("comb", "finesse"),
        peak_od=cfg.get_float("comb", "peak_od"),
        background_od=cfg.get_float("comb", "background_od"),
        tooth_shape=cfg.get_str("comb", "tooth_shape", "square"),
        center_offset=cfg.get_float("comb", "center_offset_hz", 0.0),
    )


def _persistence_from_cfg(cfg: Scenario) -> holes.PersistenceModel:
    return holes.PersistenceModel(
        w1=cfg.get_float("persistence", "w1"),
        t1sa=cfg.get_float("persistence", "t1sa_s"),
        w2=cfg.get_float("persistence", "w2"),
        t1sb=cfg.get_float("persistence", "t1sb_s"),
    )


# ------------------------------------------------------------------ scenarios

def scen_absorption(cfg: Scenario, outdir: Path) -> dict:
    """Beer-Lambert round trip on a synthetic absorption line."""
    peak_od = cfg.get_float("medium", "peak_od")
    fwhm = cfg.get_float("medium", "line_fwhm_hz")
    loss = cfg.get_float("medium", "loss_factor")
    grid = FrequencyGrid(0.0, cfg.get_float("grid", "span_hz"),
                         cfg.get_int("grid", "n_points"))
    half = fwhm / 2
    od = peak_od * half**2 / (grid.values**2 + half**2)
    profile = SpectralProfile(grid, od)

    trans = beer_lambert_transmission(profile, loss)
    recovered, clamped = extract_od(np.ones_like(trans), trans, loss, grid)
    save_spectrum_csv(outdir / "transmission.csv", grid.values, trans)
    save_spectrum_csv(outdir / "extracted_od.csv", grid.values, recovered.od,
                      value_name="od")
    svgplot.line_plot(outdir / "absorption.svg",
                      [(grid.values / 1e9, trans, "transmission"),
                       (grid.values / 1e9, recovered.od, "extracted OD")],
                      title="absorption round trip", xlabel="detuning (GHz)")
    return {
        "peak_od_in": peak_od,
        "peak_od_recovered": float(np.max(recovered.od)),
        "transmission_at_peak": float(trans[np.argmax(od)]),
        "round_trip_max_abs_err": float(np.max(np.abs(recovered.od - od))),
        "clamped_points": clamped,
    }


def scen_hole_decay(cfg: Scenario, outdir: Path) -> dict:
    """Burn a calibrated narrow hole, track its area decay, refit the
    two-lifetime model, and grade a noisy synthetic recovery."""
    persistence = _persistence_from_cfg(cfg)
    grid = FrequencyGrid(0.0, cfg.get_float("grid", "span_hz"),
                         cfg.get_int("grid", "n_points"))
    pump_width = cfg.get_float("pump", "width_hz")
    homog = cfg.get_float("pump", "homogeneous_width_hz")
    burn_s = cfg.get_float("pump", "burn_duration_s")
    target_ground = cfg.get_float("pump", "target_ground_fraction")

    weight = np.where(np.abs(grid.values) <= pump_width / 2, 1.0, 0.0)
    probe = holes.PumpModel(grid, weight, 1.0, homog)
    rate = holes.calibrate_pump_rate(probe, persistence, burn_s, target_ground)
    pump = holes.PumpModel(grid, weight, rate, homog)
    state = holes.burn(holes.fresh_state(grid), pump, persistence, burn_s)

    # hole linewidth from the transmission spectrum 50 ms after the burn
    first = holes.decay(state, persistence, 0.050)
    ref = SpectralProfile(grid, np.full(grid.n_points, cfg.get_float("pump", "reference_od")))
    trans = beer_lambert_transmission(holes.population_to_od(first, ref))
    hole_fit = fitting.fit("lorentzian", grid.values, trans)

    waits = np.geomspace(cfg.get_float("monitor", "first_wait_s"),
                         cfg.get_float("monitor", "last_wait_s"),
                         cfg.get_int("monitor", "n_waits"))
    areas = np.array([holes.hole_area(holes.decay(state, persistence, w))
                      for w in waits])
    norm = areas[0]
    rel = areas / norm
    coherence.save_decay_csv(outdir / "hole_decay.csv", waits, rel, np.zeros_like(rel))
    svgplot.line_plot(outdir / "hole_decay.svg", [(waits, rel, "hole area")],
                      title="spectral hole decay", xlabel="wait (s)",
                      ylabel="area (norm. to first point)", scatter=True)

    decay_fit = fitting.fit("biexponential", waits, areas)
    # the fitted weights carry the Hz area scale; only their ratio is
    # physical, so report them renormalized to the model's total weight
    w_sum = decay_fit["w1"] + decay_fit["w2"]
    w_model = persistence.w1 + persistence.w2

    # synthetic recoveries backing the fit-suite checks
    rng = np.random.default_rng(cfg.seed)
    f_true = cfg.get_float("synthetic", "lorentzian_fwhm_hz")
    x = np.linspace(-6 * f_true, 6 * f_true, 241)
    noise = cfg.get_float("synthetic", "noise_rms")
    y = fitting.lorentzian(x, 1.0, 0.0, f_true, 0.0) + rng.normal(0, noise, x.size)
    lor_fit = fitting.fit("lorentzian", x, y, sigma=np.full(x.size, noise))

    truth = np.array([persistence.w1, persistence.t1sa, persistence.w2, persistence.t1sb])
    ty = fitting.biexponential(waits, *truth)
    noisy = ty * (1 + rng.normal(0, 0.01, ty.size))
    bi_fit = fitting.fit("biexponential", waits, noisy, sigma=0.01 * ty)

    return {
        "calibrated_pump_rate_hz": rate,
        "ground_fraction_at_center": float(np.min(state.ground_fraction)),
        "hole_fwhm_mhz": hole_fit["fwhm"] / 1e6,
        "area_ratio_t1sa_vs_50ms": float(
            holes.hole_area(holes.decay(state, persistence, persistence.t1sa)) / norm),
        "fit_converged": decay_fit.converged,
        "recovered_w1": decay_fit["w1"] / w_sum * w_model,
        "recovered_t1sa_s": decay_fit["t1"],
        "recovered_w2": decay_fit["w2"] / w_sum * w_model,
        "recovered_t1sb_s": decay_fit["t2"],
        "synthetic_lorentzian_fwhm_hz": lor_fit["fwhm"],
        "synthetic_biexp_w1": bi_fit["w1"],
        "synthetic_biexp_t1sa_s": bi_fit["t1"],
        "synthetic_biexp_w2": bi_fit["w2"],
        "synthetic_biexp_t1sb_s": bi_fit["t2"],
    }


def scen_hahn_echo(cfg: Scenario, outdir: Path) -> dict:
    """Synthesize heterodyne echo traces along a decay, extract amplitudes
    by FFT, and recover the optical coherence time."""
    t2o = cfg.get_float("decay", "t2o_s")
    beat = cfg.get_float("detection", "beat_frequency_hz")
    rate = cfg.get_float("detection", "sample_rate_hz")
    duration = cfg.get_float("detection", "record_s")
    shots = cfg.get_int("detection", "shots_per_point")
    t12 = np.linspace(cfg.get_float("decay", "t12_first_s"),
                      cfg.get_float("decay", "t12_last_s"),
                      cfg.get_int("decay", "n_points"))
    model = coherence.EchoDecayModel(cfg.get_float("decay", "i0"), t2o)
    amps = np.sqrt(coherence.echo_intensity(model, t12))
    noise = cfg.get_float("detection", "noise_rms_rel_weakest") * amps.min()

    rng = np.random.default_rng(cfg.seed)
    means, sigmas = [], []
    for a in amps:
        vals = [coherence.extract_echo_amplitude(
            coherence.synthesize_heterodyne(a, beat, duration, noise, rate, rng=rng),
            beat) for _ in range(shots)]
        means.append(np.mean(vals))
        sigmas.append(np.std(vals) / np.sqrt(shots))
    intensities = np.array(means) ** 2
    isig = 2 * np.array(means) * np.array(sigmas)
    coherence.save_decay_csv(outdir / "echo_decay.csv", t12, intensities, isig)

    res = fitting.fit("echo_decay", t12, intensities, sigma=isig)
    svgplot.line_plot(outdir / "echo_decay.svg",
                      [(t12 * 1e6, intensities, "measured"),
                       (t12 * 1e6, fitting.echo_decay(t12, *res.parameters), "fit")],
                      title="two-pulse echo decay", xlabel="t12 (us)",
                      ylabel="echo intensity")
    sched = coherence.hahn_echo_schedule(float(t12[0]))
    return {
        "t2o_true_s": t2o,
        "t2o_fit_s": res["t2o"],
        "t2o_rel_err": abs(res["t2o"] - t2o) / t2o,
        "fit_converged": res.converged,
        "pi_half_duration_s": sched.pi_half_duration,
        "pi_duration_s": sched.pi_duration,
        "echo_delay_over_t12": sched.echo_time / sched.t12,
    }


def scen_comb_synthesis(cfg: Scenario, outdir: Path) -> dict:
    """Synthesize the storage comb, grade it, and verify the echo arrival
    across the full range of configured storage times."""
    spec = _comb_from_cfg(cfg)
    ppt = cfg.get_int("comb", "points_per_tooth", 16)
    step = spec.tooth_width / ppt
    span = 1.2 * spec.bandwidth
    grid = FrequencyGrid(spec.center_offset, span, int(round(span / step)) + 1)
    profile = synthesize(spec, grid)
    metrics = comb_metrics(profile)

    zoom = np.abs(grid.values - spec.center_offset) <= 200e6
    save_spectrum_csv(outdir / "comb_zoom.csv", grid.values[zoom],
                      profile.od[zoom], value_name="od")
    svgplot.line_plot(outdir / "comb_zoom.svg",
                      [(grid.values[zoom] / 1e6, profile.od[zoom], "")],
                      title="comb profile (400 MHz zoom)",
                      xlabel="detuning (MHz)", ylabel="OD")

    pulse_fwhm = cfg.get_float("probe", "pulse_fwhm_s")
    dt = cfg.get_float("probe", "dt_s")
    arrivals = {}
    for ts in cfg.get_floats("probe", "echo_check_storage_times_s"):
        sweep = CombSpec.from_storage_time(
            ts, spec.bandwidth, finesse=spec.finesse, peak_od=spec.peak_od,
            background_od=spec.background_od)
        resp = comb_response(sweep, points_per_tooth=ppt)
        t_in = 6 * pulse_fwhm
        pulse = gaussian_pulse(pulse_fwhm, t_in, 2 * t_in, dt)
        out = propagate(pulse, resp)
        t = out.times
        mask = (t > t_in + 0.5 / sweep.tooth_spacing) & (t < t_in + 1.5 / sweep.tooth_spacing)
        idx = np.flatnonzero(mask)
        arrival = float(t[idx[np.argmax(np.abs(out.samples[idx]) ** 2)]] - t_in)
        arrivals[f"echo_arrival_{ts * 1e9:g}ns_s"] = arrival
        arrivals[f"echo_arrival_err_steps_{ts * 1e9:g}ns"] = \
            abs(arrival - 1 / sweep.tooth_spacing) / dt

    return {
        "tooth_spacing_hz": spec.tooth_spacing,
        "n_teeth": spec.n_teeth,
        "storage_time_s": storage_time(spec),
        "metrics_tooth_spacing_hz": metrics.tooth_spacing,
        "metrics_finesse": metrics.finesse,
        "metrics_peak_od": metrics.peak_od,
        "metrics_background_od": metrics.background_od,
        "metrics_bandwidth_hz": metrics.bandwidth,
        "time_grid_step_s": dt,
        **arrivals,
    }


def scen_eq1_efficiency(cfg: Scenario, outdir: Path) -> dict:
    """Analytic comb efficiency, the external-loss chain, and the
    numeric-vs-analytic comparison across peak OD."""
    spec = _comb_from_cfg(cfg)
    loss = cfg.get_float("comb", "external_transmission")
    eta = analytic_efficiency(spec)
    no_bg = analytic_efficiency(CombSpec(
        spec.tooth_spacing, spec.bandwidth, spec.finesse, spec.peak_od, 0.0))

    pulse_fwhm = cfg.get_float("probe", "pulse_fwhm_s")
    dt = cfg.get_float("probe", "dt_s")
    ratios = {}
    for d in cfg.get_floats("scan", "peak_od_values"):
        sweep = CombSpec(spec.tooth_spacing, spec.bandwidth, spec.finesse, d,
                         spec.background_od)
        resp = comb_response(sweep, points_per_tooth=cfg.get_int("comb", "points_per_tooth", 16))
        t_in = 6 * pulse_fwhm
        pulse = gaussian_pulse(pulse_fwhm, t_in, 2 * t_in, dt)
        out = propagate(pulse, resp)
        eff = echo_efficiency(pulse, out, t_in + storage_time(sweep), 4 * pulse_fwhm)
        ratios[f"numeric_over_analytic_d{d:g}"] = eff / analytic_efficiency(sweep)

    return {
        "analytic_efficiency": eta,
        "analytic_efficiency_no_background": no_bg,
        "external_transmission": loss,
        "total_efficiency_with_loss": eta * loss,
        **ratios,
    }


def _weak_coherent_counting(cfg: Scenario, echo_time: float) -> dict:
    src = counting.SourceModel.weak_coherent(
        cfg.get_float("source", "mean_photon_number"),
        cfg.get_float("source", "repetition_rate_hz"))
    det = counting.DetectorModel(
        efficiency=cfg.get_float("detector", "efficiency"),
        dark_rate=cfg.get_float("detector", "dark_rate_hz"),
        jitter_fwhm=cfg.get_float("detector", "jitter_fwhm_s"))
    live = cfg.get_float("sequence", "storage_live_s")
    reps = cfg.get_int("sequence", "repetitions")
    fwhm = cfg.get_float("source", "pulse_fwhm_s")
    hist = counting.simulate_counts(
        src, cfg.get_float("source", "channel_efficiency"), det, echo_time,
        cfg.get_float("memory", "efficiency"), live * reps, seed=cfg.seed,
        signal_fwhm=fwhm)
    eff_fwhm = float(np.hypot(fwhm, det.jitter_fwhm))
    w = 1.5 * eff_fwhm
    s = counting.snr(hist, (echo_time - w, echo_time + w),
                     (cfg.get_float("detector", "background_window_start_s"),
                      cfg.get_float("detector", "background_window_end_s")))
    return {"histogram": hist, "snr": s, "window_halfwidth_s": w}


def scen_multimode_59(cfg: Scenario, outdir: Path) -> dict:
    """Store and recall the 59-mode train, measure cross-talk, and simulate
    the accumulated detection histogram of the weak-coherent experiment."""
    spec = _comb_from_cfg(cfg)
    resp = comb_response(spec, points_per_tooth=cfg.get_int("comb", "points_per_tooth", 16))
    train = ModeTrain.uniform(cfg.get_int("train", "n_modes"),
                              cfg.get_float("train", "mode_fwhm_s"),
                              cfg.get_float("train", "mode_spacing_s"))
    result = store_train(train, resp, echo_time=storage_time(spec))

    t = result.recalled.times
    keep = t <= result.echo_time + train.n_modes * train.mode_spacing + 20 * train.mode_fwhm
    rows = np.stack([t[keep], np.real(result.recalled.samples[keep]),
                     np.imag(result.recalled.samples[keep])], axis=1)
    np.savetxt(outdir / "recalled_waveform.csv", rows, delimiter=",",
               header="time_s,re,im", comments="")
    svgplot.line_plot(outdir / "recalled_train.svg",
                      [(t[keep] * 1e9, np.abs(result.recalled.samples[keep]) ** 2, "")],
                      title="recalled mode train", xlabel="time (ns)",
                      ylabel="|field|^2")

    snr_block = _weak_coherent_counting(cfg, storage_time(spec))
    counting.histogram_to_csv(outdir / "storage_histogram.csv", snr_block["histogram"])
    s = snr_block["snr"]
    fidelity_sim = counting.timebin_fidelity(s)
    fid_ref = counting.timebin_fidelity(cfg.get_float("reference", "snr"))
    bound = counting.classical_bound(cfg.get_float("source", "mean_photon_number"),
                                     cfg.get_float("memory", "efficiency"))
    cap = mode_capacity(storage_time(spec),
                        cfg.get_float("capacity", "mode_duration_s"),
                        cfg.get_float("capacity", "mode_spacing_s"))
    return {
        "n_modes": train.n_modes,
        "echo_time_s": result.echo_time,
        "order_preserved": result.order_preserved,
        "max_cross_talk_db": result.max_cross_talk_db(),
        "mean_mode_efficiency": float(np.mean(result.per_mode_efficiency)),
        "capacity_at_min_mode_duration": cap,
        "snr_weak_coherent": s,
        "timebin_fidelity_simulated": fidelity_sim,
        "timebin_fidelity_at_reference_snr": fid_ref,
        "classical_bound": bound,
        "beats_classical_bound": counting.beats_classical(fid_ref, bound),
    }


def scen_random_timebins(cfg: Scenario, outdir: Path) -> dict:
    """Random time-bin pattern storage: the recalled pattern must reproduce
    the input ordering and weights."""
    spec = _comb_from_cfg(cfg)
    resp = comb_response(spec, points_per_tooth=cfg.get_int("comb", "points_per_tooth", 16))
    n_slots = cfg.get_int("train", "n_slots")
    rng = np.random.default_rng(cfg.seed)
    fill = cfg.get_float("train", "fill_probability")
    pattern = (rng.random(n_slots) < fill).astype(float)
    if not pattern.any():
        pattern[0] = 1.0
    train = ModeTrain(n_slots, cfg.get_float("train", "mode_fwhm_s"),
                      cfg.get_float("train", "mode_spacing_s"), pattern)
    result = store_train(train, resp, echo_time=storage_time(spec))

    recalled = result.recalled_energies
    expected = pattern**2
    corr = float(np.corrcoef(expected, recalled)[0, 1])
    np.savetxt(outdir / "pattern.csv",
               np.stack([np.arange(n_slots), pattern, recalled], axis=1),
               delimiter=",", header="slot,input_amplitude,recalled_energy",
               comments="")
    return {
        "n_slots": n_slots,
        "n_filled": int(pattern.sum()),
        "pattern_correlation": corr,
        "order_preserved": result.order_preserved,
        "span_s": (n_slots - 1) * train.mode_spacing,
    }


def scen_qd_lifetime(cfg: Scenario, outdir: Path) -> dict:
    """Synthesize an excited-state decay histogram and recover the lifetime
    with the exponentially-modified-Gaussian fit."""
    tau = cfg.get_float("emitter", "lifetime_s")
    hist = counting.simulate_lifetime_histogram(
        tau,
        cfg.get_float("detection", "irf_sigma_s"),
        cfg.get_float("detection", "rise_time_s"),
        cfg.get_float("detection", "bin_width_s"),
        cfg.get_int("detection", "n_bins"),
        cfg.get_float("detection", "total_counts"),
        cfg.get_float("detection", "background_per_bin"),
        seed=cfg.seed)
    counting.histogram_to_csv(outdir / "lifetime_histogram.csv", hist)
    t = hist.bin_centers
    y = hist.counts.astype(float)
    base = float(np.median(y[t > 0.8 * t[-1]]))
    res = fitting.fit("emg", t, y - base, sigma=np.sqrt(np.maximum(y, 1.0)))
    svgplot.line_plot(outdir / "lifetime.svg",
                      [(t * 1e9, y, "counts"),
                       (t * 1e9, fitting.emg(t, *res.parameters) + base, "EMG fit")],
                      title="excited-state decay", xlabel="time (ns)", ylabel="counts")
    return {
        "lifetime_true_s": tau,
        "lifetime_fit_s": res["tau"],
        "lifetime_rel_err": abs(res["tau"] - tau) / tau,
        "irf_sigma_fit_s": res["sigma"],
        "fit_converged": res.converged,
        "subtracted_background_per_bin": base,
    }


def scen_g2_cw(cfg: Scenario, outdir: Path) -> dict:
    """CW second-order correlation: synthesize, fit, and report g2(0)."""
    g2_true = cfg.get_float("emitter", "g2_0")
    hist = counting.simulate_cw_g2_histogram(
        g2_true,
        cfg.get_float("emitter", "antibunch_time_s"),
        cfg.get_float("emitter", "bunch_amplitude"),
        cfg.get_float("emitter", "bunch_time_s"),
        cfg.get_float("detection", "baseline_counts_per_bin"),
        cfg.get_float("detection", "max_delay_s"),
        cfg.get_float("detection", "bin_width_s"),
        seed=cfg.seed,
        acquisition_time=cfg.get_float("detection", "acquisition_s"))
    counting.histogram_to_csv(outdir / "g2_cw_histogram.csv", hist)
    t = hist.bin_centers
    y = hist.counts.astype(float)
    res = fitting.fit("g2_cw", t, y, sigma=np.sqrt(np.maximum(y, 1.0)))
    svgplot.line_plot(outdir / "g2_cw.svg",
                      [(t * 1e9, y / res["norm"], "data"),
                       (t * 1e9, fitting.g2_cw(t, *res.parameters) / res["norm"], "fit")],
                      title="CW g2", xlabel="delay (ns)", ylabel="g2")
    return {
        "g2_0_true": g2_true,
        "g2_0_fit": res["g2_0"],
        "g2_0_sigma": res.sigma("g2_0"),
        "antibunch_time_fit_s": res["antibunch_time"],
        "fit_converged": res.converged,
        "single_photon_verdict": res["g2_0"] < 0.5,
    }


def scen_g2_pulsed(cfg: Scenario, outdir: Path) -> dict:
    """Pulsed correlation histogram and the central-peak area ratio."""
    ratio_true = cfg.get_float("emitter", "central_ratio")
    period = cfg.get_float("excitation", "repetition_period_s")
    bg_rate = cfg.get_float("detection", "background_rate_hz")
    acq = cfg.get_float("detection", "acquisition_s")
    hist = counting.simulate_pulsed_g2_histogram(
        ratio_true,
        cfg.get_float("emitter", "lifetime_s"),
        period,
        cfg.get_int("detection", "n_side_peaks"),
        cfg.get_float("detection", "side_peak_area_counts"),
        bg_rate,
        cfg.get_float("detection", "bin_width_s"),
        seed=cfg.seed,
        acquisition_time=acq)
    counting.histogram_to_csv(outdir / "g2_pulsed_histogram.csv", hist)
    ratio = counting.g2_pulsed_area_ratio(hist, period, bg_rate)
    svgplot.line_plot(outdir / "g2_pulsed.svg",
                      [(hist.bin_centers * 1e9, hist.counts.astype(float), "")],
                      title="pulsed g2", xlabel="delay (ns)", ylabel="counts")
    return {
        "central_ratio_true": ratio_true,
        "central_ratio_measured": ratio,
        "abs_err": abs(ratio - ratio_true),
        "single_photon_verdict": ratio < 0.5,
    }


def scen_qd_storage(cfg: Scenario, outdir: Path) -> dict:
    """Single-emitter storage: hole-scan bandwidth matching, the counting
    histogram over the long acquisition, and the g2 propagation chain."""
    src = counting.SourceModel.single_emitter(
        cfg.get_float("source", "g2_0"),
        cfg.get_float("source", "lifetime_s"),
        cfg.get_float("source", "repetition_rate_hz"))
    det = counting.DetectorModel(
        efficiency=cfg.get_float("detector", "efficiency"),
        dark_rate=cfg.get_float("detector", "dark_rate_hz"),
        jitter_fwhm=cfg.get_float("detector", "jitter_fwhm_s"))
    echo_time = cfg.get_float("memory", "storage_time_s")
    live = cfg.get_float("sequence", "storage_live_s")
    reps = cfg.get_int("sequence", "repetitions")
    fwhm = cfg.get_float("source", "pulse_fwhm_s")
    hist = counting.simulate_counts(
        src, cfg.get_float("source", "channel_efficiency"), det, echo_time,
        cfg.get_float("memory", "efficiency"), live * reps, seed=cfg.seed,
        signal_fwhm=fwhm)
    counting.histogram_to_csv(outdir / "qd_storage_histogram.csv", hist)

    eff_fwhm = float(np.hypot(fwhm, det.jitter_fwhm))
    w = 1.5 * eff_fwhm
    s = counting.snr(hist, (echo_time - w, echo_time + w),
                     (cfg.get_float("detector", "background_window_start_s"),
                      cfg.get_float("detector", "background_window_end_s")))
    g2_in = cfg.get_float("source", "g2_0")
    snr_ref = cfg.get_float("reference", "snr")

    # bandwidth matching: scan a square hole across the emitter line
    hole_w = cfg.get_float("hole_scan", "hole_width_hz")
    span = cfg.get_float("hole_scan", "scan_halfspan_hz")
    egrid = FrequencyGrid(0.0, cfg.get_float("hole_scan", "emitter_grid_span_hz"),
                          cfg.get_int("hole_scan", "emitter_grid_points"))
    half = 1.0 / (2 * np.pi * cfg.get_float("source", "lifetime_s")) / 2
    emitter = SpectralProfile(egrid, half**2 / (egrid.values**2 + half**2))
    offsets = np.linspace(-span, span, cfg.get_int("hole_scan", "n_offsets"))
    scan = hole_scan_match(emitter, hole_w, offsets,
                           background_od=cfg.get_float("hole_scan", "background_od"))
    base, peak = float(scan.min()), float(scan.max())
    above = offsets[scan > (base + peak) / 2]
    plateau = float(above.max() - above.min())
    scan_fit = fitting.fit("lorentzian", offsets, scan, max_iterations=2000)
    save_spectrum_csv(outdir / "hole_scan.csv", offsets, scan,
                      value_name="transmission")
    svgplot.line_plot(outdir / "hole_scan.svg", [(offsets / 1e9, scan, "")],
                      title="hole-scan bandwidth matching",
                      xlabel="hole center offset (GHz)", ylabel="transmission")

    return {
        "snr": s,
        "g2_in": g2_in,
        "g2_out_at_simulated_snr": counting.g2_out(g2_in, s),
        "g2_out_at_reference_snr": counting.g2_out(g2_in, snr_ref),
        "below_classical_limit": counting.g2_out(g2_in, snr_ref) < 1.0,
        "scan_plateau_width_hz": plateau,
        "scan_lorentzian_fwhm_hz": scan_fit["fwhm"],
        "scan_fit_converged": scan_fit.converged,
    }


def scen_sequence_timing(cfg: Scenario, outdir: Path) -> dict:
    """Compile the storage sequence, check all gating rules, and summarize
    the acquisition at both repetition counts."""
    phases = sequencer.paper_storage_phases(
        wait_setup=cfg.get_str("phases", "wait_setup"),
        burn=cfg.get_str("phases", "burn"),
        wait_decay=cfg.get_str("phases", "wait_decay"),
        storage=cfg.get_str("phases", "storage"),
        trial_rate_hz=cfg.get_float("phases", "trial_rate_hz"))
    reps_a = cfg.get_int("repetitions", "weak_coherent")
    reps_b = cfg.get_int("repetitions", "single_emitter")
    timeline = sequencer.compile_sequence(phases, reps_a)
    sequencer.timeline_to_csv(outdir / "timeline.csv", timeline)

    gate_off_ns = sum(p.duration_ns for p in phases[:3])
    report = sequencer.validate_timeline(timeline, sequencer.standard_rules(gate_off_ns))
    summary_a = sequencer.acquisition_summary(timeline)
    summary_b = sequencer.acquisition_summary(
        sequencer.compile_sequence(phases, reps_b))
    return {
        "total_duration_ns": timeline.total_duration_ns,
        "trial_slots_per_sequence": timeline.trial_slots_per_sequence,
        "rules_all_pass": all(r.passed for r in report),
        **{f"rule_{r.rule}": r.passed for r in report},
        "wall_time_weak_coherent_s": summary_a.wall_time_s,
        "live_time_weak_coherent_s": summary_a.live_time_s,
        "total_trials_weak_coherent": summary_a.total_trials,
        "wall_time_single_emitter_s": summary_b.wall_time_s,
        "total_trials_single_emitter": summary_b.total_trials,
        "initial_gate_off_ns": gate_off_ns,
    }


SCENARIOS = {
    "absorption": scen_absorption,
    "comb-synthesis": scen_comb_synthesis,
    "eq1-efficiency": scen_eq1_efficiency,
    "g2-cw": scen_g2_cw,
    "g2-pulsed": scen_g2_pulsed,
    "hahn-echo": scen_hahn_echo,
    "hole-decay": scen_hole_decay,
    "multimode-59": scen_multimode_59,
    "qd-lifetime": scen_qd_lifetime,
    "qd-storage": scen_qd_storage,
    "random-timebins": scen_random_timebins,
    "sequence-timing": scen_sequence_timing,
}


def run_scenario(cfg: Scenario, outdir: Path) -> dict:
    if cfg.name not in SCENARIOS:
        raise ConfigError(
            f"{cfg.path}: unknown scenario {cfg.name!r}; known: {sorted(SCENARIOS)}"
        )
    return SCENARIOS[cfg.name](cfg, outdir)
