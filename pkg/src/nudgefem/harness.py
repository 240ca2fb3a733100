"""Experiment harness: error series, slope fits, decay studies, CSV emission.

CSV schemas:
  decay study  -> one file per beta: "t,l2_error,obs_ratio,div_residual"
  convergence  -> "h,n,max_window_error" rows plus a "# slope=..." footer
All floats are written with 17 significant digits so files round-trip exactly.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

from . import manufactured, metrics, timeloop
from .errors import InvalidConfigError
from .timeloop import SimulationConfig, StepRecord


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ErrorSeries:
    samples: tuple          # of StepRecord
    config_echo: str

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def errors(self) -> np.ndarray:
        return np.array([s.l2_error for s in self.samples])


@dataclass(frozen=True)
class ConvergenceReport:
    points: tuple           # of (h, N, max_window_error)
    slope: float
    window: tuple           # (T_w, T)

    def errors(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


@dataclass(frozen=True)
class DecayPrediction:
    gamma: float
    nu: float
    H: float
    beta: float
    c_I_assumed: float
    coarse_branch: float    # nu / (2 c_I^2 H^2)
    beta_branch: float      # beta / 2


# -- metrics -------------------------------------------------------------------

def l2_error(coeffs, dofmap, t: float, degree: int = 8) -> float:
    """|u_h - u(., t)|_0 against the closed-form solution."""
    return metrics.l2_velocity_error(dofmap, coeffs, manufactured.eval_u, t,
                                     degree=degree)


def fit_slope(points) -> float:
    """Least-squares slope of log(err) vs log(h)."""
    points = list(points)
    if len(points) < 2:
        raise InvalidConfigError("slope fit needs at least 2 points")
    h = np.array([p[0] for p in points], dtype=float)
    e = np.array([p[1] for p in points], dtype=float)
    if np.any(h <= 0) or np.any(e <= 0):
        raise InvalidConfigError("slope fit needs positive values")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def fit_decay_rate(series: ErrorSeries, t_start: float, t_end: float) -> float:
    """Exponential decay rate (positive = decaying) of the error over a window,
    from a least-squares fit of log(err) vs t."""
    t = series.times()
    e = series.errors()
    mask = (t >= t_start) & (t <= t_end) & (e > 0)
    if mask.sum() < 2:
        raise InvalidConfigError("decay fit window contains fewer than 2 samples")
    return float(-np.polyfit(t[mask], np.log(e[mask]), 1)[0])


def predict_gamma(nu: float, H: float, beta: float,
                  c_I_assumed: float = 1.0) -> DecayPrediction:
    if nu <= 0 or H <= 0 or beta <= 0 or c_I_assumed <= 0:
        raise InvalidConfigError("gamma prediction needs positive inputs")
    coarse = nu / (2.0 * c_I_assumed ** 2 * H ** 2)
    return DecayPrediction(gamma=min(coarse, beta / 2.0), nu=nu, H=H,
                           beta=beta, c_I_assumed=c_I_assumed,
                           coarse_branch=coarse, beta_branch=beta / 2.0)


def asymptotic_max(series: ErrorSeries, window_fraction: float = 0.25) -> float:
    """Max error over the trailing window of the run."""
    if not 0 < window_fraction <= 1:
        raise InvalidConfigError(f"window_fraction {window_fraction} not in (0, 1]")
    t = series.times()
    e = series.errors()
    t_end = t[-1]
    mask = t >= (1.0 - window_fraction) * t_end
    if not mask.any():
        raise InvalidConfigError("empty asymptotic window")
    return float(e[mask].max())


# -- runs ----------------------------------------------------------------------

def _config_echo(config: SimulationConfig) -> str:
    return (f"nu={_fmt(config.nu)} beta={_fmt(config.beta)} mu={_fmt(config.mu)} "
            f"N={config.N} k={config.k} dt={_fmt(config.timestep)} "
            f"T={_fmt(config.T)} interpolant={config.interpolant} "
            f"initial={config.initial}")


def run_series(config: SimulationConfig) -> ErrorSeries:
    records = tuple(timeloop.run(config))
    return ErrorSeries(samples=records, config_echo=_config_echo(config))


def run_decay_study(base: SimulationConfig, betas, out_dir=None):
    """One ErrorSeries per beta; returns {beta: ErrorSeries or Exception}."""
    results = {}
    for beta in betas:
        try:
            cfg = replace(base, beta=float(beta))
            series = run_series(cfg)
        except Exception as exc:  # record and continue with the remaining betas
            results[beta] = exc
            continue
        results[beta] = series
        if out_dir is not None:
            emit_decay_csv(series, os.path.join(out_dir, _decay_filename(beta)))
    return results


def _decay_filename(beta) -> str:
    return f"decay_beta{format(float(beta), 'g')}.csv"


def run_convergence(nu: float, mu: float, N_list, k: int, beta: float,
                    interpolant: str = "pc", T: float = 4.0,
                    dt_scale: float = 1.0, window_fraction: float = 0.25,
                    k_for_N=None) -> ConvergenceReport:
    """Max-window errors over a mesh sequence and their log-log slope.

    `k_for_N` optionally maps N to a coarsening ratio (used by the fixed-H
    Lagrange mode); otherwise `k` is used for every N.
    """
    points = []
    T_w = (1.0 - window_fraction) * T
    for N in N_list:
        kk = k_for_N(N) if k_for_N is not None else k
        cfg = SimulationConfig(nu=nu, beta=beta, mu=mu, N=N, k=kk, T=T,
                               interpolant=interpolant)
        if dt_scale != 1.0:
            cfg = replace(cfg, dt=cfg.timestep * dt_scale)
        series = run_series(cfg)
        points.append((1.0 / N, N, asymptotic_max(series, window_fraction)))
    slope = fit_slope([(p[0], p[2]) for p in points])
    return ConvergenceReport(points=tuple(points), slope=slope, window=(T_w, T))


def run_lagrange_study(nu: float, mu: float, beta: float, mode: str,
                       N_list=(12, 24, 48), T: float = 4.0,
                       dt_scale: float = 1.0) -> ConvergenceReport:
    """Lagrange-observation study: mode 'H3h' (k=3) or 'Hfixed' (H=0.25)."""
    if mode == "H3h":
        return run_convergence(nu, mu, N_list, k=3, beta=beta,
                               interpolant="lagrange", T=T, dt_scale=dt_scale)
    if mode == "Hfixed":
        for N in N_list:
            if N % 4 != 0:
                raise InvalidConfigError(f"H=0.25 mode needs 4 | N, got N={N}")
        return run_convergence(nu, mu, N_list, k=0, beta=beta,
                               interpolant="lagrange", T=T, dt_scale=dt_scale,
                               k_for_N=lambda N: N // 4)
    raise InvalidConfigError(f"unknown Lagrange study mode {mode!r}")


def temporal_order(N: int = 32, k: int = 4, dt0: float = 0.05, T: float = 1.0,
                   nu: float = 1.0, beta: float = 1.0, mu: float = 0.0,
                   initial: str = "exact") -> float:
    """Observed BDF2 order from Richardson differences of final states.

    The spatial discretization is identical across the three runs, so the
    solution differences isolate the time-stepping error.
    """
    finals = []
    dofmap = None
    for dt in (dt0, dt0 / 2.0, dt0 / 4.0):
        cfg = SimulationConfig(nu=nu, beta=beta, mu=mu, N=N, k=k, T=T, dt=dt,
                               initial=initial)
        _, state = timeloop.run_to_end(cfg)
        finals.append(state.u_prev)
    sim_dofmap = timeloop.Simulation(
        SimulationConfig(nu=nu, beta=beta, mu=mu, N=N, k=k, T=T, dt=dt0,
                         initial=initial))
    M = sim_dofmap.ops.M
    d1 = np.sqrt((finals[0] - finals[1]) @ (M @ (finals[0] - finals[1])))
    d2 = np.sqrt((finals[1] - finals[2]) @ (M @ (finals[1] - finals[2])))
    return float(np.log2(d1 / d2))


def dominance_guard(config: SimulationConfig,
                    window_fraction: float = 0.25):
    """Relative change of the reported max-window error when dt is halved."""
    base = asymptotic_max(run_series(config), window_fraction)
    halved = asymptotic_max(run_series(config.with_halved_dt()), window_fraction)
    return abs(halved - base) / base, base, halved


# -- CSV -----------------------------------------------------------------------

def emit_decay_csv(series: ErrorSeries, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# {series.config_echo}\n")
        fh.write("t,l2_error,obs_ratio,div_residual\n")
        for s in series.samples:
            fh.write(f"{_fmt(s.t)},{_fmt(s.l2_error)},"
                     f"{_fmt(s.obs_ratio)},{_fmt(s.div_residual)}\n")


def parse_decay_csv(path) -> ErrorSeries:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("# "):
        raise InvalidConfigError(f"{path}: missing config echo header")
    echo = lines[0][2:]
    if lines[1] != "t,l2_error,obs_ratio,div_residual":
        raise InvalidConfigError(f"{path}: unexpected decay CSV header {lines[1]!r}")
    samples = []
    for ln in lines[2:]:
        if not ln:
            continue
        t, e, r, d = (float(v) for v in ln.split(","))
        samples.append(StepRecord(t=t, l2_error=e, obs_ratio=r, div_residual=d))
    return ErrorSeries(samples=tuple(samples), config_echo=echo)


def emit_convergence_csv(report: ConvergenceReport, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("h,n,max_window_error\n")
        for h, N, err in report.points:
            fh.write(f"{_fmt(h)},{N},{_fmt(err)}\n")
        fh.write(f"# slope={_fmt(report.slope)}\n")


def parse_convergence_csv(path) -> ConvergenceReport:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if lines[0] != "h,n,max_window_error":
        raise InvalidConfigError(f"{path}: unexpected convergence CSV header")
    points = []
    slope = None
    for ln in lines[1:]:
        if ln.startswith("# slope="):
            slope = float(ln.split("=", 1)[1])
            continue
        h, N, err = ln.split(",")
        points.append((float(h), int(N), float(err)))
    if slope is None:
        raise InvalidConfigError(f"{path}: missing slope footer")
    return ConvergenceReport(points=tuple(points), slope=slope, window=(0.0, 0.0))
