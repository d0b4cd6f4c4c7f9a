"""Explicit finite-volume integrator for the viscous pair and its first variation.

Semi-discretization of u_t + F(u)_x = eps * (B(u) u_x)_x in conservation form:
face-averaged convective fluxes (plain central or Rusanov-blended) and a
divergence-form viscous flux with the viscosity matrix evaluated at the
arithmetic-mean face state.  Time stepping is strong-stability-preserving
two-stage Runge-Kutta with a combined advective/diffusive CFL step size.

The linearized solve replays the base trajectory in lockstep (identical dt
sequence) and advances the first variation with the exact Jacobian-vector
product of the discrete update, so a finite-difference derivative of the
nonlinear map reproduces it to the perturbation's own truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FieldPair, Grid1D
from .model import ModelSpec

__all__ = ["SolverConfig", "SolveRun", "BlowupError", "step", "solve", "solve_linearized"]

_LIMITERS = ("central", "rusanov_blend")


class BlowupError(RuntimeError):
    """The state became non-finite or left the model's validation box."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float
    t_end: float
    snapshot_times: tuple[float, ...] = ()
    cfl_adv: float = 0.4
    cfl_diff: float = 0.25
    limiter: str = "central"

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (self.t_end >= 0 and np.isfinite(self.t_end)):
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if not 0 < self.cfl_adv <= 1:
            raise ValueError(f"cfl_adv must lie in (0, 1], got {self.cfl_adv}")
        if not 0 < self.cfl_diff <= 0.5:
            raise ValueError(f"cfl_diff must lie in (0, 0.5], got {self.cfl_diff}")
        if self.limiter not in _LIMITERS:
            raise ValueError(f"limiter must be one of {_LIMITERS}, got {self.limiter!r}")
        times = tuple(float(t) for t in self.snapshot_times)
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("snapshot_times must be strictly increasing")
        object.__setattr__(self, "snapshot_times", times)


@dataclass(frozen=True)
class SolveRun:
    model: ModelSpec
    grid: Grid1D
    config: SolverConfig
    snapshots: tuple[tuple[float, FieldPair], ...]
    step_log: tuple[tuple[float, float, float, float], ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def state_at(self, t: float) -> FieldPair:
        for ts, u in self.snapshots:
            if abs(ts - t) <= 1e-9 * max(1.0, abs(t)):
                return u
        raise KeyError(f"no snapshot at t={t}; available: {[s for s, _ in self.snapshots]}")

    def final(self) -> FieldPair:
        return self.snapshots[-1][1]


# ---------------------------------------------------------------------------
# spatial operator
# ---------------------------------------------------------------------------

def _face_states(u1: np.ndarray, u2: np.ndarray):
    f1 = 0.5 * (u1[:-1] + u1[1:])
    f2 = 0.5 * (u2[:-1] + u2[1:])
    return f1, f2


def _rhs(m: ModelSpec, eps: float, dx: float, limiter: str,
         u1: np.ndarray, u2: np.ndarray):
    """Semi-discrete right-hand side; boundary cells get zero tendency."""
    F1 = m.f.value(u1, u2)
    F2 = m.g.value(u1, u2)
    lam1 = m.lambda1(u1, u2)
    lam2 = m.lambda2(u1, u2)
    speed = np.maximum(np.abs(lam1), np.abs(lam2))

    # convective face fluxes between cells i and i+1
    flux1 = 0.5 * (F1[:-1] + F1[1:])
    flux2 = 0.5 * (F2[:-1] + F2[1:])
    if limiter == "rusanov_blend":
        a = np.maximum(speed[:-1], speed[1:])
        flux1 = flux1 - 0.5 * a * (u1[1:] - u1[:-1])
        flux2 = flux2 - 0.5 * a * (u2[1:] - u2[:-1])

    # viscous face fluxes B(face state) * (u_{i+1} - u_i) / dx
    uf1, uf2 = _face_states(u1, u2)
    a1f = np.broadcast_to(m.alpha1.value(uf1, uf2), uf1.shape)
    a2f = m.alpha2.value(uf1, uf2)
    bf = m.beta(uf1, uf2)
    du1 = (u1[1:] - u1[:-1]) / dx
    du2 = (u2[1:] - u2[:-1]) / dx
    visc1 = a1f * du1
    visc2 = bf * du1 + a2f * du2

    total1 = -flux1 + eps * visc1
    total2 = -flux2 + eps * visc2

    r1 = np.zeros_like(u1)
    r2 = np.zeros_like(u2)
    r1[1:-1] = (total1[1:] - total1[:-1]) / dx
    r2[1:-1] = (total2[1:] - total2[:-1]) / dx
    return r1, r2, float(speed.max()), float(max(np.max(a1f, initial=0.0), np.max(a2f, initial=0.0)))


def _rhs_linearized(m: ModelSpec, eps: float, dx: float, limiter: str,
                    u1: np.ndarray, u2: np.ndarray,
                    h1: np.ndarray, h2: np.ndarray):
    """Exact Jacobian-vector product of _rhs at (u1, u2), applied to (h1, h2).

    The Rusanov dissipation coefficient is frozen (not differentiated); the
    central limiter's product is exact.
    """
    lam1 = m.lambda1(u1, u2)
    lam2 = m.lambda2(u1, u2)
    gu1 = m.g.d1(u1, u2)
    Ah1 = lam1 * h1
    Ah2 = gu1 * h1 + lam2 * h2

    flux1 = 0.5 * (Ah1[:-1] + Ah1[1:])
    flux2 = 0.5 * (Ah2[:-1] + Ah2[1:])
    if limiter == "rusanov_blend":
        speed = np.maximum(np.abs(lam1), np.abs(lam2))
        a = np.maximum(speed[:-1], speed[1:])
        flux1 = flux1 - 0.5 * a * (h1[1:] - h1[:-1])
        flux2 = flux2 - 0.5 * a * (h2[1:] - h2[:-1])

    uf1, uf2 = _face_states(u1, u2)
    hf1, hf2 = _face_states(h1, h2)
    a1f = np.broadcast_to(m.alpha1.value(uf1, uf2), uf1.shape)
    a2f = m.alpha2.value(uf1, uf2)
    bf = m.beta(uf1, uf2)
    da1 = np.broadcast_to(m.alpha1.d1(uf1, uf2), uf1.shape)
    da2_1 = m.alpha2.d1(uf1, uf2)
    da2_2 = m.alpha2.d2(uf1, uf2)
    db1, db2 = m.beta_grad(uf1, uf2)

    du1 = (u1[1:] - u1[:-1]) / dx
    du2 = (u2[1:] - u2[:-1]) / dx
    dh1 = (h1[1:] - h1[:-1]) / dx
    dh2 = (h2[1:] - h2[:-1]) / dx

    # d/dtheta of B(u_face) du/dx: directional derivative of B plus B itself
    visc1 = (da1 * hf1) * du1 + a1f * dh1
    visc2 = (db1 * hf1 + db2 * hf2) * du1 + (da2_1 * hf1 + da2_2 * hf2) * du2 \
        + bf * dh1 + a2f * dh2

    total1 = -flux1 + eps * visc1
    total2 = -flux2 + eps * visc2
    r1 = np.zeros_like(h1)
    r2 = np.zeros_like(h2)
    r1[1:-1] = (total1[1:] - total1[:-1]) / dx
    r2[1:-1] = (total2[1:] - total2[:-1]) / dx
    return r1, r2


def _check_admissible(m: ModelSpec, u1: np.ndarray, u2: np.ndarray, t: float):
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise BlowupError("solution became non-finite", t)
    if not m.in_box(u1, u2):
        raise BlowupError(
            f"solution left validation box {m.validation_box}: "
            f"u1 in [{u1.min():.4g}, {u1.max():.4g}], u2 in [{u2.min():.4g}, {u2.max():.4g}]", t)


def _ssp_rk2(m: ModelSpec, eps: float, dx: float, limiter: str,
             u1: np.ndarray, u2: np.ndarray, dt: float):
    r1, r2, maxlam, maxalpha = _rhs(m, eps, dx, limiter, u1, u2)
    s1 = u1 + dt * r1
    s2 = u2 + dt * r2
    q1, q2, _, _ = _rhs(m, eps, dx, limiter, s1, s2)
    out1 = 0.5 * u1 + 0.5 * (s1 + dt * q1)
    out2 = 0.5 * u2 + 0.5 * (s2 + dt * q2)
    return out1, out2, maxlam, maxalpha


def step(u: FieldPair, m: ModelSpec, eps: float, dt: float) -> FieldPair:
    """One SSP-RK2 step with the central limiter; raises BlowupError on exit."""
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError(f"dt must be positive, got {dt}")
    dx = u.grid.dx
    out1, out2, _, _ = _ssp_rk2(m, eps, dx, "central", u.u1.values, u.u2.values, dt)
    _check_admissible(m, out1, out2, dt)
    return FieldPair(u.u1.with_values(out1), u.u2.with_values(out2))


def _dt_cfl(cfg: SolverConfig, dx: float, maxlam: float, maxalpha: float) -> float:
    dt_adv = cfg.cfl_adv * dx / maxlam if maxlam > 0 else np.inf
    dt_diff = cfg.cfl_diff * dx * dx / (cfg.epsilon * maxalpha) if maxalpha > 0 else np.inf
    dt = min(dt_adv, dt_diff)
    if not (dt > 0 and np.isfinite(dt)):
        raise BlowupError(f"step size degenerate: max|lambda|={maxlam}, max alpha={maxalpha}")
    return dt


def _event_times(cfg: SolverConfig) -> list[float]:
    events = sorted({float(t) for t in cfg.snapshot_times if 0.0 < t < cfg.t_end})
    if cfg.t_end > 0:
        events.append(cfg.t_end)
    return events


def solve(m: ModelSpec, u0: FieldPair, cfg: SolverConfig) -> SolveRun:
    """Integrate to t_end, landing exactly on each requested snapshot time."""
    grid = u0.grid
    dx = grid.dx
    u1 = u0.u1.values.copy()
    u2 = u0.u2.values.copy()
    _check_admissible(m, u1, u2, 0.0)

    snapshots: list[tuple[float, FieldPair]] = [
        (0.0, FieldPair(u0.u1.with_values(u1), u0.u2.with_values(u2)))]
    step_log: list[tuple[float, float, float, float]] = []

    t = 0.0
    for t_event in _event_times(cfg):
        while t < t_event - 1e-14 * max(1.0, t_event):
            r1, r2, maxlam, maxalpha = _rhs(m, cfg.epsilon, dx, cfg.limiter, u1, u2)
            dt = _dt_cfl(cfg, dx, maxlam, maxalpha)
            remaining = t_event - t
            landing = dt >= remaining * (1.0 - 1e-12)
            if landing:
                dt = remaining
            s1, s2 = u1 + dt * r1, u2 + dt * r2
            q1, q2, _, _ = _rhs(m, cfg.epsilon, dx, cfg.limiter, s1, s2)
            u1 = 0.5 * u1 + 0.5 * (s1 + dt * q1)
            u2 = 0.5 * u2 + 0.5 * (s2 + dt * q2)
            step_log.append((t, dt, maxlam, maxalpha))
            t = t_event if landing else t + dt
            _check_admissible(m, u1, u2, t)
        snapshots.append((t_event, FieldPair(u0.u1.with_values(u1), u0.u2.with_values(u2))))

    return SolveRun(model=m, grid=grid, config=cfg,
                    snapshots=tuple(snapshots), step_log=tuple(step_log))


def solve_linearized(m: ModelSpec, base: SolveRun, h0: FieldPair) -> SolveRun:
    """First-variation solve along the base trajectory, replayed in lockstep.

    The base states are regenerated with the identical dt sequence (not
    interpolated), and each Runge-Kutta stage advances h with the exact
    Jacobian-vector product of that stage's discrete operator.
    """
    if h0.grid != base.grid:
        raise ValueError("perturbation grid does not match the base run's grid")
    cfg = base.config
    dx = base.grid.dx
    u1 = base.snapshots[0][1].u1.values.copy()
    u2 = base.snapshots[0][1].u2.values.copy()
    h1 = h0.u1.values.copy()
    h2 = h0.u2.values.copy()

    snapshots: list[tuple[float, FieldPair]] = [
        (0.0, FieldPair(h0.u1.with_values(h1), h0.u2.with_values(h2)))]
    step_log: list[tuple[float, float, float, float]] = []

    snap_iter = iter(base.snapshots[1:])
    next_snap = next(snap_iter, None)
    t = 0.0
    for t_log, dt, maxlam, maxalpha in base.step_log:
        # stage 1
        r1, r2, _, _ = _rhs(m, cfg.epsilon, dx, cfg.limiter, u1, u2)
        p1, p2 = _rhs_linearized(m, cfg.epsilon, dx, cfg.limiter, u1, u2, h1, h2)
        s1, s2 = u1 + dt * r1, u2 + dt * r2
        g1, g2 = h1 + dt * p1, h2 + dt * p2
        # stage 2
        q1, q2, _, _ = _rhs(m, cfg.epsilon, dx, cfg.limiter, s1, s2)
        w1, w2 = _rhs_linearized(m, cfg.epsilon, dx, cfg.limiter, s1, s2, g1, g2)
        u1 = 0.5 * u1 + 0.5 * (s1 + dt * q1)
        u2 = 0.5 * u2 + 0.5 * (s2 + dt * q2)
        h1 = 0.5 * h1 + 0.5 * (g1 + dt * w1)
        h2 = 0.5 * h2 + 0.5 * (g2 + dt * w2)
        t = t_log + dt
        if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
            raise BlowupError("first variation became non-finite", t)
        step_log.append((t_log, dt, maxlam, maxalpha))
        if next_snap is not None and t >= next_snap[0] - 1e-14 * max(1.0, next_snap[0]):
            snapshots.append((next_snap[0],
                              FieldPair(h0.u1.with_values(h1), h0.u2.with_values(h2))))
            next_snap = next(snap_iter, None)

    return SolveRun(model=m, grid=base.grid, config=cfg,
                    snapshots=tuple(snapshots), step_log=tuple(step_log))


def write_snapshots_csv(run: SolveRun, path) -> None:
    """Serialize snapshots as CSV rows t,x,u1,u2 (17 significant digits)."""
    xs = run.grid.centers
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,u1,u2\n")
        for t, u in run.snapshots:
            for x, a, b in zip(xs, u.u1.values, u.u2.values):
                fh.write(f"{t:.17g},{x:.17g},{a:.17g},{b:.17g}\n")


def write_step_log_csv(run: SolveRun, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,dt,max_lambda,max_alpha\n")
        for t, dt, maxlam, maxalpha in run.step_log:
            fh.write(f"{t:.17g},{dt:.17g},{maxlam:.17g},{maxalpha:.17g}\n")
