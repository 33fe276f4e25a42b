"""Nonlinear weighted least-squares fitting with the model library used by
the analysis pipelines.

The minimizer is a Levenberg-Marquardt-class trust-region iteration
(scipy's bounded TRF) driven through analytic Jacobians; a finite-difference
cross-check of the Jacobian is available for every model. Fits are
deterministic given data and initial guess, and non-convergence yields a
flagged result rather than an exception.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfc, erfcx

from .errors import RankDeficiencyError

__all__ = [
    "FitModel",
    "FitResult",
    "MODELS",
    "get_model",
    "fit",
    "initial_guess",
    "numeric_jacobian",
    "lorentzian",
    "single_exponential",
    "biexponential",
    "emg",
    "g2_cw",
    "echo_decay",
]

_SQRT2 = np.sqrt(2.0)
_TINY = 1e-30


# ---------------------------------------------------------------- model forms

def lorentzian(x, amplitude, center, fwhm, offset):
    h = fwhm / 2
    return offset + amplitude * h**2 / ((x - center) ** 2 + h**2)


def single_exponential(t, amplitude, tau):
    return amplitude * np.exp(-t / tau)


def biexponential(t, w1, t1, w2, t2):
    return w1 * np.exp(-t / t1) + w2 * np.exp(-t / t2)


def emg(t, amplitude, mean, sigma, tau):
    """Exponentially modified Gaussian, area-normalized to ``amplitude``.

    (A/2tau) exp(sigma^2/2tau^2 - (t-mean)/tau) erfc((sigma/tau - (t-mean)/sigma)/sqrt2),
    evaluated through erfcx where the exponent would overflow.
    """
    t = np.asarray(t, float)
    z = (sigma / tau - (t - mean) / sigma) / _SQRT2
    out = np.empty_like(t)
    pos = z >= 0
    # for z >= 0: exp(arg) erfc(z) = erfcx(z) exp(arg - z^2) with
    # arg - z^2 = -(t-mean)^2 / (2 sigma^2)
    out[pos] = erfcx(z[pos]) * np.exp(-((t[pos] - mean) ** 2) / (2 * sigma**2))
    arg = sigma**2 / (2 * tau**2) - (t - mean) / tau
    out[~pos] = np.exp(arg[~pos]) * erfc(z[~pos])
    return amplitude / (2 * tau) * out


def g2_cw(t, norm, g2_0, antibunch_time, bunch_amplitude, bunch_time):
    """CW intensity correlation: antibunching dip plus optional bunching shoulder."""
    at = np.abs(t)
    return norm * (1 - (1 - g2_0) * np.exp(-at / antibunch_time)
                   + bunch_amplitude * np.exp(-at / bunch_time))


def echo_decay(t12, i0, t2o):
    """Two-pulse echo intensity i0 * exp(-4 t12 / t2o)."""
    return i0 * np.exp(-4 * t12 / t2o)


# ------------------------------------------------------------------ Jacobians

def _jac_lorentzian(x, p):
    amplitude, center, fwhm, _ = p
    h = fwhm / 2
    denom = (x - center) ** 2 + h**2
    shape = h**2 / denom
    return np.stack([
        shape,
        amplitude * h**2 * 2 * (x - center) / denom**2,
        amplitude * h * (x - center) ** 2 / denom**2,
        np.ones_like(x),
    ], axis=1)


def _jac_single_exponential(t, p):
    amplitude, tau = p
    e = np.exp(-t / tau)
    return np.stack([e, amplitude * e * t / tau**2], axis=1)


def _jac_biexponential(t, p):
    w1, t1, w2, t2 = p
    e1, e2 = np.exp(-t / t1), np.exp(-t / t2)
    return np.stack([e1, w1 * e1 * t / t1**2, e2, w2 * e2 * t / t2**2], axis=1)


def _jac_emg(t, p):
    amplitude, mean, sigma, tau = p
    val = emg(t, amplitude, mean, sigma, tau)
    gauss = np.exp(-((t - mean) ** 2) / (2 * sigma**2)) / (sigma * np.sqrt(2 * np.pi))
    d_amp = val / amplitude if amplitude != 0 else emg(t, 1.0, mean, sigma, tau)
    d_mean = val / tau - amplitude / tau * gauss
    d_sigma = val * sigma / tau**2 - amplitude / tau * gauss * (sigma / tau + (t - mean) / sigma)
    d_tau = val * ((t - mean) / tau**2 - 1 / tau - sigma**2 / tau**3) \
        + amplitude * sigma**2 / tau**3 * gauss
    return np.stack([d_amp, d_mean, d_sigma, d_tau], axis=1)


def _jac_g2_cw(t, p):
    norm, g2_0, antibunch_time, bunch_amplitude, bunch_time = p
    at = np.abs(t)
    ea = np.exp(-at / antibunch_time)
    eb = np.exp(-at / bunch_time)
    core = 1 - (1 - g2_0) * ea + bunch_amplitude * eb
    return np.stack([
        core,
        norm * ea,
        -norm * (1 - g2_0) * ea * at / antibunch_time**2,
        norm * eb,
        norm * bunch_amplitude * eb * at / bunch_time**2,
    ], axis=1)


def _jac_echo_decay(t12, p):
    i0, t2o = p
    e = np.exp(-4 * t12 / t2o)
    return np.stack([e, i0 * e * 4 * t12 / t2o**2], axis=1)


# ------------------------------------------------------------- initial guesses

def _guess_lorentzian(x, y):
    offset = float(np.min(y))
    amplitude = float(np.max(y) - offset)
    center = float(x[np.argmax(y)])
    above = y > offset + amplitude / 2
    dx = float(np.median(np.diff(x))) if len(x) > 1 else 1.0
    fwhm = max(np.count_nonzero(above) * abs(dx), abs(dx))
    return np.array([amplitude, center, fwhm, offset])


def _log_slope(t, y):
    m = y > 0
    if np.count_nonzero(m) < 2:
        return None
    return np.polyfit(t[m], np.log(y[m]), 1)


def _guess_single_exponential(t, y):
    amplitude = float(np.max(y))
    co = _log_slope(t, y)
    tau = -1.0 / co[0] if co is not None and co[0] < 0 else float(t[-1] - t[0]) or 1.0
    return np.array([amplitude, tau])


def _guess_biexponential(t, y):
    n = len(t)
    early = _log_slope(t[: max(2, n // 3)], y[: max(2, n // 3)])
    late = _log_slope(t[-max(2, n // 3):], y[-max(2, n // 3):])
    span = float(t[-1] - t[0]) or 1.0
    t1 = -1.0 / early[0] if early is not None and early[0] < 0 else span / 10
    t2 = -1.0 / late[0] if late is not None and late[0] < 0 else span * 2
    if t2 <= t1:
        t2 = 10 * t1
    w2 = float(np.exp(late[1])) if late is not None else float(np.max(y)) / 2
    w1 = max(float(np.max(y)) - w2, w2 / 10)
    return np.array([w1, t1, w2, t2])


def _guess_emg(t, y):
    # moment matching restricted to the significant-signal region: baseline
    # noise far out in the tail would otherwise dominate the third moment
    k = max(len(y) // 8, 1)
    base = float(np.median(np.partition(y, k)[:k]))
    yc = np.maximum(y - base, 0.0)
    peak = float(np.max(yc))
    if peak <= 0:
        return None
    sig = yc > 0.02 * peak
    ts, ys = t[sig], yc[sig]
    total = float(np.sum(ys))
    if total <= 0:
        return None
    w = ys / total
    mean_t = float(np.sum(w * ts))
    var = float(np.sum(w * (ts - mean_t) ** 2))
    m3 = float(np.sum(w * (ts - mean_t) ** 3))
    tau = np.cbrt(m3 / 2) if m3 > 0 else np.sqrt(var) / 2
    sigma = np.sqrt(max(var - tau**2, var / 100))
    dx = float(np.median(np.diff(t))) if len(t) > 1 else 1.0
    return np.array([float(np.sum(yc)) * abs(dx), mean_t - tau, sigma, tau])


def _guess_g2_cw(t, y):
    at = np.abs(t)
    tail = y[at > 0.7 * np.max(at)]
    norm = float(np.median(tail)) if len(tail) else float(np.median(y))
    if norm <= 0:
        return None
    g2_0 = float(np.clip(np.min(y) / norm, 0.0, 0.95))
    half = norm * (g2_0 + (1 - g2_0) * 0.5)
    rising = at[y < half]
    antibunch = float(np.max(rising)) / np.log(2) if len(rising) else np.max(at) / 10
    bunch_amp = max(float(np.max(y) / norm - 1), 0.01)
    return np.array([norm, g2_0, antibunch, bunch_amp, 3 * antibunch])


def _guess_echo_decay(t, y):
    i0 = float(np.max(y))
    co = _log_slope(t, y)
    t2o = -4.0 / co[0] if co is not None and co[0] < 0 else 4 * (float(t[-1] - t[0]) or 1.0)
    return np.array([i0, t2o])


# ----------------------------------------------------------------- model table

@dataclass(frozen=True)
class FitModel:
    """A named model: call signature, parameter bounds, and guess strategy."""

    kind: str
    param_names: tuple[str, ...]
    fn: Callable
    jac: Callable
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    guess: Callable | None = None

    def __post_init__(self):
        n = len(self.param_names)
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bounds length must match parameter count")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("bounds must satisfy lower < upper")

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def __call__(self, x, params):
        return self.fn(x, *params)


_INF = np.inf

MODELS: dict[str, FitModel] = {
    "lorentzian": FitModel(
        "lorentzian", ("amplitude", "center", "fwhm", "offset"),
        lorentzian, _jac_lorentzian,
        (0.0, -_INF, _TINY, -_INF), (_INF, _INF, _INF, _INF), _guess_lorentzian),
    "single_exponential": FitModel(
        "single_exponential", ("amplitude", "tau"),
        single_exponential, _jac_single_exponential,
        (0.0, _TINY), (_INF, _INF), _guess_single_exponential),
    "biexponential": FitModel(
        "biexponential", ("w1", "t1", "w2", "t2"),
        biexponential, _jac_biexponential,
        (0.0, _TINY, 0.0, _TINY), (_INF, _INF, _INF, _INF), _guess_biexponential),
    "emg": FitModel(
        "emg", ("amplitude", "mean", "sigma", "tau"),
        emg, _jac_emg,
        (0.0, -_INF, _TINY, _TINY), (_INF, _INF, _INF, _INF), _guess_emg),
    "g2_cw": FitModel(
        "g2_cw", ("norm", "g2_0", "antibunch_time", "bunch_amplitude", "bunch_time"),
        g2_cw, _jac_g2_cw,
        (_TINY, 0.0, _TINY, 0.0, _TINY), (_INF, 1.0, _INF, _INF, _INF), _guess_g2_cw),
    "echo_decay": FitModel(
        "echo_decay", ("i0", "t2o"),
        echo_decay, _jac_echo_decay,
        (_TINY, _TINY), (_INF, _INF), _guess_echo_decay),
}


def get_model(kind: str) -> FitModel:
    try:
        return MODELS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; known: {sorted(MODELS)}") from None


def initial_guess(model: FitModel, x, y) -> np.ndarray:
    """Heuristic starting parameters; bound midpoints when data are flat."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if len(x) == 0:
        raise ValueError("data must be non-empty")
    guess = None
    if model.guess is not None and np.ptp(y) > 0:
        guess = model.guess(x, y)
    if guess is None:
        guess = np.array([
            (lo + hi) / 2 if np.isfinite(lo) and np.isfinite(hi)
            else (max(lo, 0.0) + 1.0)
            for lo, hi in zip(model.lower, model.upper)
        ])
    return np.clip(guess, np.array(model.lower) * (1 + 1e-9) + 1e-300,
                   np.array(model.upper))


@dataclass(frozen=True)
class FitResult:
    """Outcome of a weighted least-squares fit.

    ``converged`` is False when the iteration hit its budget or the Jacobian
    was rank-deficient at the solution; parameters are then unreliable.
    """

    model: str
    param_names: tuple[str, ...]
    parameters: np.ndarray
    sigmas: np.ndarray
    reduced_chi2: float
    converged: bool
    n_iterations: int
    residuals: np.ndarray
    message: str = ""

    def __getitem__(self, name: str) -> float:
        return float(self.parameters[self.param_names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.param_names.index(name)])

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": {n: float(v) for n, v in zip(self.param_names, self.parameters)},
            "sigmas": {n: float(v) for n, v in zip(self.param_names, self.sigmas)},
            "reduced_chi2": float(self.reduced_chi2),
            "converged": bool(self.converged),
            "n_iterations": int(self.n_iterations),
        }


def numeric_jacobian(model: FitModel, x, params, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian, for cross-checking the analytic one."""
    x = np.asarray(x, float)
    params = np.asarray(params, float)
    cols = []
    for i in range(len(params)):
        h = rel_step * max(abs(params[i]), 1e-12)
        pp, pm = params.copy(), params.copy()
        pp[i] += h
        pm[i] -= h
        cols.append((model(x, pp) - model(x, pm)) / (2 * h))
    return np.stack(cols, axis=1)


def fit(model: FitModel | str, x, y, sigma=None, p0=None,
        max_iterations: int = 200, check_jacobian: bool = False) -> FitResult:
    """Weighted least-squares fit of ``model`` to (x, y).

    Parameters
    ----------
    sigma : array_like, optional
        Per-point 1-sigma uncertainties; when given, residuals are whitened
        and reported parameter uncertainties use the absolute noise scale.
        Without it the covariance is scaled by the reduced chi-square.
    p0 : array_like, optional
        Starting parameters; defaults to :func:`initial_guess`.

    Raises
    ------
    RankDeficiencyError
        If the Jacobian at the starting point has no usable sensitivity
        (zero rank): the iteration could not take a single step.
    """
    if isinstance(model, str):
        model = get_model(model)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if len(x) < model.n_params + 1:
        raise ValueError(
            f"need at least {model.n_params + 1} points for {model.kind}, got {len(x)}"
        )
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, float)
    if sigma is not None and np.any(~np.isfinite(w)):
        raise ValueError("sigma must be positive and finite")

    p0 = initial_guess(model, x, y) if p0 is None else np.asarray(p0, float)

    def residual(p):
        return (model(x, p) - y) * w

    def jacobian(p):
        return model.jac(x, p) * w[:, None]

    j0 = jacobian(p0)
    if not np.any(np.abs(j0) > 0):
        raise RankDeficiencyError(
            f"model {model.kind!r} has zero parameter sensitivity at the "
            "starting point; cannot iterate"
        )
    if check_jacobian:
        jn = numeric_jacobian(model, x, p0) * w[:, None]
        scale = np.max(np.abs(j0)) or 1.0
        worst = np.max(np.abs(j0 - jn)) / scale
        if worst > 1e-4:
            raise RuntimeError(
                f"analytic Jacobian disagrees with finite differences "
                f"(max rel dev {worst:.2e})"
            )

    res = least_squares(residual, p0, jac=jacobian, bounds=(model.lower, model.upper),
                        method="trf", xtol=1e-10, ftol=1e-12, gtol=1e-10,
                        max_nfev=max_iterations)

    params = res.x
    jac_sol = res.jac
    m, n = len(x), model.n_params
    dof = max(m - n, 1)
    chi2_red = float(2 * res.cost / dof)
    converged = bool(res.success) and res.status != 0
    message = res.message

    # covariance through a column-scaled normal matrix so parameters of
    # very different magnitudes do not fake rank deficiency
    jtj = jac_sol.T @ jac_sol
    scale = np.sqrt(np.maximum(np.diag(jtj), 0.0))
    degenerate = scale <= 0
    scale[degenerate] = 1.0
    corr = jtj / np.outer(scale, scale)
    cond = np.linalg.cond(corr)
    if np.any(degenerate) or not np.isfinite(cond) or cond > 1e12:
        corr_inv = np.linalg.pinv(corr)
        converged = False
        message = "rank-deficient Jacobian at solution; " + message
    else:
        corr_inv = np.linalg.inv(corr)
    cov = corr_inv / np.outer(scale, scale)
    if sigma is None:
        cov = cov * chi2_red
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))

    if model.kind == "biexponential" and params[1] > params[3]:
        # keep the fast component first to kill the label-swap degeneracy
        params = params[[2, 3, 0, 1]]
        sigmas = sigmas[[2, 3, 0, 1]]

    return FitResult(
        model=model.kind,
        param_names=model.param_names,
        parameters=params,
        sigmas=sigmas,
        reduced_chi2=chi2_red,
        converged=converged,
        n_iterations=int(res.nfev),
        residuals=model(x, params) - y,
        message=message,
    )
