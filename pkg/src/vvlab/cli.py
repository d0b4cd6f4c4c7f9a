"""Command line entry point: config parsing, run orchestration, CSV output.

A scenario is described by a TOML file whose sections mirror the package
layout ([model], [grid], [solver], [data], [diagnostics], plus optional
[sweep], [stability], [continuity] and [[checks]] rows).  Parsing is
strict: unknown sections or keys are rejected instead of ignored, since
a typo that silently falls back to a default is the most expensive kind
of configuration bug in a reproducibility tool.

Exit codes: 0 success, 1 a declarative check failed, 2 the model's
standing hypotheses fail on its box, 3 a solve blew up, 4 config error.

Everything numeric that lands in a CSV comes from the solver state and
the config alone, so identical configs give byte-identical CSVs.  Wall
time and library versions go to manifest.txt only.
"""

from __future__ import annotations

import argparse
import copy
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from . import __version__
from .core import FieldPair, Grid1D, integral_l1, total_variation
from .decomposition import (CutoffTheta, CutoffThetaHat, default_delta1,
                            frames_for_run, write_frames_csv)
from .functionals import (area_dissipation_series, area_series,
                          derivative_norm_series, energy_term,
                          fit_loglog_slope, interaction_integrals,
                          length_series, phi2_series, write_functionals_csv)
from .model import (ModelDomainError, ModelSpec, build_model,
                    list_model_families, validate)
from .reference import epsilon_sweep, time_continuity_probe, write_sweep_csv
from .scenarios import (DEFAULT_SUITE, list_data_families, list_scenarios,
                        make_initial_data, perturbation_pair, scenario_config)
from .solver import (BlowupError, SolveRun, SolverConfig, solve,
                     solve_linearized, write_snapshots_csv)
from .stability import (hhat_diagnostics, homotopy_stability,
                        write_stability_csv)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_MODEL = 2
EXIT_BLOWUP = 3
EXIT_CONFIG = 4

_FUNCTIONAL_NAMES = ("area", "length", "interaction", "phi2", "energy", "decay")

_SUITES = {"default": DEFAULT_SUITE}


class ConfigError(ValueError):
    """Raised for malformed, unknown, or inconsistent configuration."""


@dataclass(frozen=True)
class Check:
    metric: str
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.metric:
            raise ConfigError("check without a metric name")
        if self.lower > self.upper:
            raise ConfigError(
                f"check on {self.metric!r} has empty range "
                f"[{self.lower}, {self.upper}]")

    def status(self, value: float) -> str:
        ok = np.isfinite(value) and self.lower <= value <= self.upper
        return "ok" if ok else "fail"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model_family: str
    model_params: dict
    grid: Grid1D
    solver: SolverConfig
    data_family: str
    delta0: float
    data_params: dict
    halving: bool
    time_dilation: float
    frames: bool
    functionals: tuple[str, ...]
    delta1: float | None
    s_backend: str
    t_hat: float
    fit_t_min: float
    sweep_epsilons: tuple[float, ...]
    sweep_t_end: float
    stability_n_theta: int
    stability_delta0: float
    stability_tol_fraction: float
    continuity_epsilons: tuple[float, ...]
    checks: tuple[Check, ...]


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    out_dir: Path | None
    metrics: dict
    failures: tuple[str, ...]
    error: str = ""


def _take(section: dict, key, default):
    value = section.pop(key, default)
    if type(default) is float and isinstance(value, int):
        value = float(value)
    if default is not None and not isinstance(value, type(default)):
        raise ConfigError(
            f"key {key!r} expects {type(default).__name__}, "
            f"got {type(value).__name__}")
    return value


def _reject_leftovers(section: dict, where: str) -> None:
    if section:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(section)}")


def parse_config(raw: dict, name: str) -> ScenarioConfig:
    """Validate a nested config dict; every unknown section or key fails."""
    raw = copy.deepcopy(raw)
    known = {"model", "grid", "solver", "data", "diagnostics", "sweep",
             "stability", "continuity", "checks"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    model = raw.get("model", {})
    family = _take(model, "family", "")
    if family not in list_model_families():
        raise ConfigError(
            f"unknown model family {family!r}; "
            f"available: {', '.join(list_model_families())}")
    model_params = dict(model)

    grid_sec = raw.get("grid", {})
    try:
        grid = Grid1D(_take(grid_sec, "x_min", -20.0),
                      _take(grid_sec, "x_max", 20.0),
                      _take(grid_sec, "n", 1024))
    except ValueError as exc:
        raise ConfigError(f"bad [grid]: {exc}") from exc
    _reject_leftovers(grid_sec, "grid")

    solver_sec = raw.get("solver", {})
    try:
        solver = SolverConfig(
            epsilon=_take(solver_sec, "epsilon", 0.1),
            t_end=_take(solver_sec, "t_end", 1.0),
            snapshot_times=tuple(_take(solver_sec, "snapshots", [])),
            cfl_adv=_take(solver_sec, "cfl_adv", 0.4),
            cfl_diff=_take(solver_sec, "cfl_diff", 0.25),
            limiter=_take(solver_sec, "limiter", "central"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [solver]: {exc}") from exc
    _reject_leftovers(solver_sec, "solver")

    data = raw.get("data", {})
    data_family = _take(data, "family", "bump")
    if data_family not in list_data_families():
        raise ConfigError(
            f"unknown data family {data_family!r}; "
            f"available: {', '.join(list_data_families())}")
    delta0 = _take(data, "delta0", 0.1)
    if not (delta0 > 0.0 and math.isfinite(delta0)):
        raise ConfigError(f"data amplitude delta0 must be positive, got {delta0}")
    halving = _take(data, "halving", False)
    time_dilation = _take(data, "time_dilation", 1.0)
    if time_dilation <= 0.0:
        raise ConfigError(f"time_dilation must be positive, got {time_dilation}")
    data_params = dict(data)

    diag = raw.get("diagnostics", {})
    frames = _take(diag, "frames", True)
    default_funcs = list(_FUNCTIONAL_NAMES) if frames else ["decay"]
    funcs = tuple(_take(diag, "functionals", default_funcs))
    bad = [f for f in funcs if f not in _FUNCTIONAL_NAMES]
    if bad:
        raise ConfigError(f"unknown functionals {bad}; "
                          f"available: {', '.join(_FUNCTIONAL_NAMES)}")
    if not frames:
        needs_frames = [f for f in funcs if f != "decay"]
        if needs_frames:
            raise ConfigError(
                f"functionals {needs_frames} need frames = true")
    delta1 = _take(diag, "delta1", 0.0)
    if delta1 < 0.0:
        raise ConfigError(f"delta1 override must be nonnegative, got {delta1}")
    s_backend = _take(diag, "s_backend", "gamma")
    t_hat = _take(diag, "t_hat", 0.25)
    fit_t_min = _take(diag, "fit_t_min", 0.01)
    if not 0.0 < fit_t_min < t_hat:
        raise ConfigError(
            f"need 0 < fit_t_min < t_hat, got {fit_t_min} and {t_hat}")
    _reject_leftovers(diag, "diagnostics")

    sweep = raw.get("sweep", {})
    sweep_eps = tuple(float(e) for e in _take(sweep, "epsilons", []))
    sweep_t_end = _take(sweep, "t_end", solver.t_end)
    _reject_leftovers(sweep, "sweep")

    stab = raw.get("stability", {})
    n_theta = _take(stab, "n_theta", 0)
    stab_delta0 = _take(stab, "delta0", delta0)
    tol_fraction = _take(stab, "tol_fraction", 0.02)
    if "stability" in raw and n_theta < 3:
        raise ConfigError(f"stability needs n_theta >= 3, got {n_theta}")
    _reject_leftovers(stab, "stability")

    cont = raw.get("continuity", {})
    cont_eps = tuple(float(e) for e in _take(cont, "epsilons", []))
    if len(cont_eps) == 1:
        raise ConfigError("continuity needs at least two viscosities to compare")
    _reject_leftovers(cont, "continuity")

    checks = []
    for i, row in enumerate(raw.get("checks", [])):
        row = dict(row)
        metric = str(row.pop("metric", ""))
        lo = float(row.pop("min", -math.inf))
        hi = float(row.pop("max", math.inf))
        _reject_leftovers(row, f"checks[{i}]")
        checks.append(Check(metric, lo, hi))

    return ScenarioConfig(
        name=name, model_family=family, model_params=model_params,
        grid=grid, solver=solver,
        data_family=data_family, delta0=float(delta0),
        data_params=data_params, halving=halving,
        time_dilation=float(time_dilation),
        frames=frames, functionals=funcs,
        delta1=(float(delta1) if delta1 > 0.0 else None),
        s_backend=s_backend, t_hat=float(t_hat), fit_t_min=float(fit_t_min),
        sweep_epsilons=sweep_eps, sweep_t_end=float(sweep_t_end),
        stability_n_theta=int(n_theta), stability_delta0=float(stab_delta0),
        stability_tol_fraction=float(tol_fraction),
        continuity_epsilons=cont_eps, checks=tuple(checks),
    )


def load_config(source) -> ScenarioConfig:
    """Resolve a built-in scenario name or a TOML file path."""
    text = str(source)
    if text in list_scenarios():
        return parse_config(scenario_config(text), text)
    path = Path(text)
    if not path.is_file():
        raise ConfigError(
            f"{text!r} is neither a built-in scenario nor a config file; "
            f"scenarios: {', '.join(list_scenarios())}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(raw, path.stem)


def _build_model_checked(cfg: ScenarioConfig) -> ModelSpec:
    try:
        m = build_model(cfg.model_family, **cfg.model_params)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad [model]: {exc}") from exc
    report = validate(m)
    if not report.passed:
        raise ModelDomainError(str(report))
    return m


def _initial_data(cfg: ScenarioConfig, m: ModelSpec,
                  delta0: float) -> FieldPair:
    try:
        return make_initial_data(m, cfg.grid, cfg.data_family, delta0,
                                 **cfg.data_params)
    except (ValueError, TypeError, ModelDomainError) as exc:
        raise ConfigError(f"bad [data]: {exc}") from exc


def _dilated_solver(cfg: ScenarioConfig, factor: float) -> SolverConfig:
    snaps = tuple(t * factor for t in cfg.solver.snapshot_times)
    return SolverConfig(epsilon=cfg.solver.epsilon,
                        t_end=cfg.solver.t_end * factor,
                        snapshot_times=snaps,
                        cfl_adv=cfg.solver.cfl_adv,
                        cfl_diff=cfg.solver.cfl_diff,
                        limiter=cfg.solver.limiter)


def _tv_pair(u: FieldPair) -> float:
    return total_variation(u.u1) + total_variation(u.u2)


def _adjacent_max(ts, vals, scale) -> float:
    worst = -math.inf
    for i in range(1, len(ts)):
        worst = max(worst, (vals[i] - vals[i - 1]) / (ts[i] - ts[i - 1]) / scale)
    return worst


def _diagnose(cfg: ScenarioConfig, m: ModelSpec, run: SolveRun,
              delta1: float, t_hat: float, fit_t_min: float):
    """Metrics plus the functional series of one run."""
    metrics: dict = {}
    series: list = []
    frames = None

    tvs = [_tv_pair(u) for _, u in run.snapshots]
    tv0 = tvs[0]
    metrics["tv_ratio_max"] = max(tvs) / tv0 if tv0 > 0.0 else 1.0

    if cfg.frames:
        frames = frames_for_run(run, m, CutoffTheta(delta1), cfg.s_backend)
        metrics["kappa1"] = max(float(np.max(np.abs(f.s.values)))
                                for f in frames)
    if "area" in cfg.functionals:
        area = area_series(frames)
        diss = area_dissipation_series(frames)
        series += [area, diss]
        a0 = area.values[0]
        # the monotonicity target compares adjacent snapshots directly,
        # with no division by the time gap
        combined = area.values + diss.values
        metrics["area_slack_ratio_max"] = (
            float(np.max(np.diff(combined))) / a0 if a0 > 0.0 else 0.0)
    if "length" in cfg.functionals:
        length = length_series(frames)
        series.append(length)
        metrics["length_drift_rate_max"] = _adjacent_max(
            length.times, length.values, length.values[0])
    if "interaction" in cfg.functionals:
        inter = interaction_integrals(run, frames)
        series += inter
    if "phi2" in cfg.functionals:
        phi2 = phi2_series(frames)
        series.append(phi2)
        metrics["phi2_endpoint"] = phi2.endpoint
        dt_max = max(dt for _, dt, _, _ in run.step_log)
        metrics["phi2_per_dx2_dt"] = phi2.endpoint / (run.grid.dx**2 + dt_max)
        if "interaction" in cfg.functionals:
            lhs = next(s for s in inter if s.name == "v1_v2").endpoint
            rhs = (integral_l1(frames[0].v1)
                   * (integral_l1(frames[0].v2) + phi2.endpoint) / m.c_hyp)
            metrics["transversal_slack"] = rhs - lhs
    if "energy" in cfg.functionals:
        energy = energy_term(frames, CutoffThetaHat(delta1))
        series.append(energy)
        metrics["energy_v_endpoint"] = energy.endpoint
    if "decay" in cfg.functionals:
        uxx = derivative_norm_series(run, 2)
        uxxx = derivative_norm_series(run, 3)
        series += [uxx, uxxx]
        for label, s in (("uxx", uxx), ("uxxx", uxxx)):
            window = [v for t, v in s.samples if fit_t_min <= t <= t_hat]
            if len(window) >= 4 and all(v > 0.0 for v in window):
                metrics[f"decay_slope_{label}"] = fit_loglog_slope(
                    s, fit_t_min, t_hat)
            tail = [v for t, v in s.samples if t >= t_hat * (1.0 - 1e-9)]
            if tail:
                metrics[f"{label}_sup_tail"] = max(tail)
    return metrics, series, frames


def _sweep_metrics(cfg: ScenarioConfig, m: ModelSpec, u0: FieldPair,
                   metrics: dict, out_dir: Path) -> None:
    result = epsilon_sweep(m, u0, cfg.sweep_epsilons, cfg.sweep_t_end)
    write_sweep_csv(result, out_dir / "sweep.csv")
    metrics["sweep_fitted_rate"] = result.fitted_rate
    gaps = [g for _, g in result.pairwise_gaps]
    metrics["sweep_gap_drop_min"] = (min(a - b for a, b in zip(gaps, gaps[1:]))
                                     if len(gaps) > 1 else math.inf)
    eps_min = min(result.epsilons)
    inv_min = dict(result.inviscid_gaps)[eps_min]
    budget = 10.0 * math.sqrt(eps_min) * _tv_pair(u0)
    metrics["sweep_gap_min_ratio"] = inv_min / budget if budget > 0 else math.inf


def _continuity_metrics(cfg: ScenarioConfig, m: ModelSpec, u0: FieldPair,
                        primary: SolveRun, metrics: dict,
                        out_dir: Path) -> None:
    rows = []
    for eps in cfg.continuity_epsilons:
        if eps == cfg.solver.epsilon:
            run = primary
        else:
            sub = SolverConfig(epsilon=eps, t_end=cfg.solver.t_end,
                               snapshot_times=cfg.solver.snapshot_times,
                               cfl_adv=cfg.solver.cfl_adv,
                               cfl_diff=cfg.solver.cfl_diff,
                               limiter=cfg.solver.limiter)
            run = solve(m, u0, sub)
        la, lb = time_continuity_probe(run, eps)
        rows.append((eps, la, lb))
    with open(out_dir / "probe.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("eps,L_a,L_b\n")
        for eps, la, lb in rows:
            fh.write(f"{eps:.17g},{la:.17g},{lb:.17g}\n")
    metrics["probe_L_max"] = max(max(la, lb) for _, la, lb in rows)
    first_lb, last_lb = rows[0][2], rows[-1][2]
    metrics["probe_Lb_ratio"] = (last_lb / first_lb if first_lb > 0.0
                                 else math.inf)


def _stability_metrics(cfg: ScenarioConfig, m: ModelSpec, ubar: FieldPair,
                       primary: SolveRun, metrics: dict,
                       out_dir: Path) -> None:
    pert = perturbation_pair(cfg.grid, cfg.stability_delta0)
    vbar = FieldPair(ubar.u1.with_values(ubar.u1.values + pert.u1.values),
                     ubar.u2.with_values(ubar.u2.values + pert.u2.values))
    report = homotopy_stability(m, ubar, vbar, cfg.stability_n_theta,
                                cfg.solver, delta1=cfg.delta1,
                                tol_fraction=cfg.stability_tol_fraction,
                                s_backend=cfg.s_backend)
    write_stability_csv(report, out_dir / "stability.csv")
    metrics["stability_L"] = report.variation_ratio
    metrics["stability_margin_over_tol"] = (
        report.homotopy_margin / report.tol if report.tol > 0.0 else 0.0)

    arr = np.array(report.samples)
    drift = -math.inf
    for th in report.thetas:
        rows = arr[np.isclose(arr[:, 0], th)]
        order = np.argsort(rows[:, 1])
        ts, nh1 = rows[order, 1], rows[order, 3]
        if len(ts) > 1:
            drift = max(drift, float(np.max(np.diff(nh1) / np.diff(ts))))
    metrics["h1_drift_rate_max"] = drift

    h_run = solve_linearized(m, primary, pert)
    diag = hhat_diagnostics(primary, h_run, m, delta1=cfg.delta1,
                            s_backend=cfg.s_backend)
    resid = next(s for s in diag if s.name == "hhat_identity_residual")
    with open(out_dir / "identity_residual.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("t,l1_residual\n")
        for t, v in resid.samples:
            fh.write(f"{t:.17g},{v:.17g}\n")
    metrics["hhat_identity_residual_max"] = float(np.max(resid.values))


def _render_config(cfg: ScenarioConfig) -> list[str]:
    lines = [f"  model.family = {cfg.model_family}"]
    for k in sorted(cfg.model_params):
        lines.append(f"  model.{k} = {cfg.model_params[k]}")
    lines.append(f"  grid = [{cfg.grid.x_min:g}, {cfg.grid.x_max:g}] "
                 f"with n = {cfg.grid.n}")
    s = cfg.solver
    lines.append(f"  solver.epsilon = {s.epsilon:g}")
    lines.append(f"  solver.t_end = {s.t_end:g}")
    lines.append(f"  solver.snapshots = {[round(t, 12) for t in s.snapshot_times]}")
    lines.append(f"  solver.cfl = ({s.cfl_adv:g}, {s.cfl_diff:g}), "
                 f"limiter = {s.limiter}")
    lines.append(f"  data.family = {cfg.data_family}, delta0 = {cfg.delta0:g}")
    for k in sorted(cfg.data_params):
        lines.append(f"  data.{k} = {cfg.data_params[k]}")
    if cfg.halving:
        lines.append(f"  data.halving = true, time_dilation = "
                     f"{cfg.time_dilation:g}")
    lines.append(f"  diagnostics.frames = {str(cfg.frames).lower()}, "
                 f"functionals = {list(cfg.functionals)}")
    lines.append(f"  diagnostics.delta1 = "
                 f"{cfg.delta1 if cfg.delta1 is not None else 'auto'}, "
                 f"s_backend = {cfg.s_backend}")
    lines.append(f"  diagnostics.t_hat = {cfg.t_hat:g}, "
                 f"fit_t_min = {cfg.fit_t_min:g}")
    if cfg.sweep_epsilons:
        lines.append(f"  sweep.epsilons = {list(cfg.sweep_epsilons)}, "
                     f"t_end = {cfg.sweep_t_end:g}")
    if cfg.stability_n_theta:
        lines.append(f"  stability.n_theta = {cfg.stability_n_theta}, "
                     f"delta0 = {cfg.stability_delta0:g}, "
                     f"tol_fraction = {cfg.stability_tol_fraction:g}")
    if cfg.continuity_epsilons:
        lines.append(f"  continuity.epsilons = {list(cfg.continuity_epsilons)}")
    return lines


def _write_manifest(path: Path, cfg: ScenarioConfig, metrics: dict,
                    check_rows: list, wall: float, exit_code: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"scenario: {cfg.name}\n")
        fh.write(f"versions: vvlab {__version__}, python "
                 f"{sys.version.split()[0]}, numpy {np.__version__}\n")
        fh.write(f"wall_time_s: {wall:.3f}\n")
        kappa = metrics.get("kappa1")
        fh.write(f"kappa1_sup_s: {'not computed' if kappa is None else f'{kappa:.17g}'}\n")
        fh.write("config:\n")
        for line in _render_config(cfg):
            fh.write(line + "\n")
        fh.write("metrics:\n")
        for name in sorted(metrics):
            fh.write(f"  {name} = {metrics[name]:.17g}\n")
        fh.write("checks:\n")
        if not check_rows:
            fh.write("  none\n")
        for metric, value, lo, hi, status in check_rows:
            fh.write(f"  {status:4s} {metric} = {value:.6g} "
                     f"in [{lo:g}, {hi:g}]\n")
        fh.write(f"exit: {exit_code}\n")


def _evaluate_checks(cfg: ScenarioConfig, metrics: dict):
    rows, failures = [], []
    for check in cfg.checks:
        value = metrics.get(check.metric, math.nan)
        status = check.status(value)
        rows.append((check.metric, value, check.lower, check.upper, status))
        if status != "ok":
            failures.append(
                f"{check.metric} = {value:.6g} outside "
                f"[{check.lower:g}, {check.upper:g}]")
    return rows, failures


def execute(cfg: ScenarioConfig, out_dir) -> RunResult:
    """Run one scenario end to end, writing artifacts into out_dir."""
    started = time.monotonic()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        m = _build_model_checked(cfg)
        u0 = _initial_data(cfg, m, cfg.delta0)
        run = solve(m, u0, cfg.solver)

        delta1 = cfg.delta1 if cfg.delta1 is not None else default_delta1(
            m, cfg.delta0)
        metrics, series, frames = _diagnose(cfg, m, run, delta1,
                                            cfg.t_hat, cfg.fit_t_min)

        if cfg.halving:
            half_cfg = _dilated_solver(cfg, cfg.time_dilation)
            u0_half = _initial_data(cfg, m, cfg.delta0 / 2.0)
            run_half = solve(m, u0_half, half_cfg)
            # the halved run shares delta1 so the cutoffs agree across the pair
            half_metrics, _, _ = _diagnose(
                cfg, m, run_half, delta1, cfg.t_hat * cfg.time_dilation,
                cfg.fit_t_min * cfg.time_dilation)
            for label in ("uxx", "uxxx"):
                hi = metrics.get(f"{label}_sup_tail")
                lo = half_metrics.get(f"{label}_sup_tail")
                if hi is not None and lo is not None and lo > 0.0:
                    metrics[f"{label}_sup_factor"] = hi / lo
            # cumulative integrals only compare like for like when the
            # halved rerun kept the same time window
            if cfg.time_dilation == 1.0:
                hi = metrics.get("phi2_endpoint")
                lo = half_metrics.get("phi2_endpoint")
                if hi is not None and lo is not None and lo > 0.0:
                    metrics["phi2_halving_factor"] = hi / lo

        if cfg.sweep_epsilons:
            try:
                _sweep_metrics(cfg, m, u0, metrics, out_dir)
            except ValueError as exc:
                raise ConfigError(f"bad [sweep]: {exc}") from exc
        if cfg.continuity_epsilons:
            _continuity_metrics(cfg, m, u0, run, metrics, out_dir)
        if cfg.stability_n_theta:
            _stability_metrics(cfg, m, u0, run, metrics, out_dir)

        write_snapshots_csv(run, out_dir / "fields.csv")
        if frames is not None:
            write_frames_csv(frames, out_dir / "frames.csv")
        if series:
            write_functionals_csv(series, out_dir / "functionals.csv")

        check_rows, failures = _evaluate_checks(cfg, metrics)
        exit_code = EXIT_CHECK if failures else EXIT_OK
        _write_manifest(out_dir / "manifest.txt", cfg, metrics, check_rows,
                        time.monotonic() - started, exit_code)
        return RunResult(exit_code, out_dir, metrics, tuple(failures))
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, out_dir, {}, (), str(exc))
    except ModelDomainError as exc:
        return RunResult(EXIT_MODEL, out_dir, {}, (), str(exc))
    except BlowupError as exc:
        return RunResult(EXIT_BLOWUP, out_dir, {}, (), str(exc))
    except ValueError as exc:
        # degenerate pipelines (too few snapshots for a probe or a fit,
        # an unresolvable sweep chain) trace back to the configuration
        return RunResult(EXIT_CONFIG, out_dir, {}, (), str(exc))


def run_scenario(source, out_dir=None) -> RunResult:
    """Resolve, execute, and report one scenario; never raises on bad input."""
    try:
        cfg = load_config(source)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, None, {}, (), str(exc))
    if out_dir is None:
        out_dir = Path(f"{cfg.name}_out")
    return execute(cfg, out_dir)


def run_suite(names, out_root) -> tuple[int, list]:
    """Run scenarios into subdirectories and compose a summary table.

    Returns the suite exit code (the worst member code) and the summary
    rows; rows of failed checks say so even when a later member fails
    harder.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    rows = []
    worst = EXIT_OK
    for name in names:
        try:
            cfg = load_config(name)
        except ConfigError:
            worst = max(worst, EXIT_CONFIG)
            rows.append((str(name), "error", math.nan, math.nan, math.nan,
                         f"exit_{EXIT_CONFIG}"))
            continue
        result = execute(cfg, out_root / cfg.name)
        worst = max(worst, result.exit_code)
        if result.error:
            rows.append((cfg.name, "error", math.nan, math.nan, math.nan,
                         f"exit_{result.exit_code}"))
            continue
        checked = set()
        for check in cfg.checks:
            value = result.metrics.get(check.metric, math.nan)
            rows.append((cfg.name, check.metric, value, check.lower,
                         check.upper, check.status(value)))
            checked.add(check.metric)
        for metric in sorted(result.metrics):
            if metric not in checked:
                rows.append((cfg.name, metric, result.metrics[metric],
                             math.nan, math.nan, "info"))
    _write_summary(rows, out_root / "suite_summary.csv")
    return worst, rows


def _write_summary(rows, path: Path) -> None:
    def cell(x):
        return f"{x:.17g}" if math.isfinite(x) else ""

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scenario,metric,value,lower,upper,status\n")
        for name, metric, value, lo, hi, status in rows:
            fh.write(f"{name},{metric},{cell(value)},{cell(lo)},{cell(hi)},"
                     f"{status}\n")


_DEFAULTS = """\
# Default scenario configuration.  Every key below shows its default;
# omitted keys take these values, unknown keys are rejected.

[model]
family = "decoupled_burgers"   # one of the built-in model families
# any further keys are passed to the family builder, e.g.
# box = [[-0.4, 0.4], [-0.4, 0.4]]

[grid]
x_min = -20.0
x_max = 20.0
n = 1024                       # cells

[solver]
epsilon = 0.1                  # viscosity scale
t_end = 1.0
snapshots = []                 # strictly increasing interior times
cfl_adv = 0.4                  # advective CFL number
cfl_diff = 0.25                # diffusive CFL number
limiter = "central"            # slope reconstruction

[data]
family = "bump"                # bump | riemann_smoothed | two_wave_collision | profile
delta0 = 0.1                   # amplitude; must be positive
halving = false                # rerun at delta0/2 and report scaling factors
time_dilation = 1.0            # time-axis stretch for the halved rerun
# any further keys are family shape parameters, e.g. center1, width1

[diagnostics]
frames = true                  # compute the gradient decomposition
functionals = ["area", "length", "interaction", "phi2", "energy", "decay"]
delta1 = 0.0                   # cutoff scale; 0 means derive from delta0
s_backend = "gamma"            # gamma | ode
t_hat = 0.25                   # threshold time for sup-tail metrics
fit_t_min = 0.01               # lower end of the decay-slope fit window

# Optional sections, absent by default:
#
# [sweep]
# epsilons = [0.4, 0.2, 0.1, 0.05]   # halving chain, largest first
# t_end = 1.0                        # defaults to solver t_end
#
# [stability]
# n_theta = 3                        # homotopy points, at least 3
# delta0 = 0.1                       # perturbation amplitude, defaults to data delta0
# tol_fraction = 0.02                # slack for the homotopy integral bound
#
# [continuity]
# epsilons = [0.2, 0.05]             # viscosities to probe and compare
#
# [[checks]]
# metric = "tv_ratio_max"            # any metric the run produces
# max = 1.5                          # and/or min = ...
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vvlab",
        description="Viscous 2x2 triangular system laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario or config file")
    p_run.add_argument("source", help="built-in scenario name or TOML path")
    p_run.add_argument("--out", default=None, help="output directory")

    p_suite = sub.add_parser("suite", help="run a named scenario suite")
    p_suite.add_argument("name", help="suite name",
                         choices=sorted(_SUITES))
    p_suite.add_argument("--out", default="suite_out",
                         help="output root directory")

    sub.add_parser("defaults", help="print the default config with comments")
    sub.add_parser("list-models", help="print the model families")
    sub.add_parser("list-scenarios", help="print the built-in scenarios")

    args = parser.parse_args(argv)

    if args.command == "defaults":
        print(_DEFAULTS, end="")
        return EXIT_OK
    if args.command == "list-models":
        for name in list_model_families():
            print(name)
        return EXIT_OK
    if args.command == "list-scenarios":
        for name in list_scenarios():
            print(name)
        return EXIT_OK
    if args.command == "run":
        result = run_scenario(args.source, args.out)
        if result.error:
            print(result.error, file=sys.stderr)
        for failure in result.failures:
            print(f"check failed: {failure}", file=sys.stderr)
        if result.out_dir is not None and not result.error:
            print(result.out_dir)
        return result.exit_code

    started = time.monotonic()
    code, rows = run_suite(_SUITES[args.name], args.out)
    wall = time.monotonic() - started
    for name, metric, value, lo, hi, status in rows:
        if status == "fail":
            print(f"check failed: {name}: {metric} = {value:.6g} "
                  f"not in [{lo:g}, {hi:g}]", file=sys.stderr)
        elif status.startswith("exit_"):
            print(f"scenario {name} failed with {status}", file=sys.stderr)
    if wall > 600.0:
        print(f"warning: suite took {wall:.0f} s, over the 600 s budget",
              file=sys.stderr)
    print(Path(args.out) / "suite_summary.csv")
    return code


if __name__ == "__main__":
    sys.exit(main())
