"""Homotopy stability experiment for the viscous pair.

Two nearby data are joined by the affine path theta*ubar + (1-theta)*vbar.
Along the path the first variation started from ubar - vbar is the exact
theta-derivative of the discrete solution map, so the L1 distance of the two
nonlinear solutions is bounded by the theta-integral of the variation norms
up to quadrature error.  The harness measures the worst variation ratio (the
Lipschitz constant of the flow seen by the experiment), the direct distance
ratio, and that integral bound with a stated tolerance.

The companion diagnostics decompose the variation along the base flow's wave
directions, with the same sigma1 and slope field s as the base frames, and
accumulate the mixed-gradient integrals that control it.  hhat1 is built from
h1 exactly like w1 is built from v1, so the two families of series coincide
on the translation mode h = u_x up to the discrete chain-rule error O(dx^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, FieldPair, d_dx, integral_l1
from .decomposition import (CutoffTheta, CutoffThetaHat, default_delta1,
                            frames_for_run, with_h)
from .functionals import FunctionalSeries, _cumulative, energy_term
from .model import ModelSpec
from .solver import BlowupError, SolverConfig, SolveRun, solve, solve_linearized

__all__ = [
    "StabilityReport",
    "homotopy_stability",
    "hhat_diagnostics",
    "write_stability_csv",
]


@dataclass(frozen=True)
class StabilityReport:
    """Per-(theta, t) variation norms and the scalar verdicts built from them.

    samples rows are (theta, t, norm_h, norm_h1, norm_h2) with h1, h2 the
    decomposition of h along the base flow's wave directions.  variation_ratio
    is the measured Lipschitz constant max ||h(t)|| / ||h(0)|| over theta and
    t; direct_ratio compares the two nonlinear endpoints the same way; and
    homotopy_margin is the worst slack in

        integral_0^1 ||h^theta(t)|| dtheta  >=  ||u(t) - v(t)||,

    which should stay above -tol (theta-quadrature is the only leak).  A
    coincident pair (h identically zero) reports all ratios as 0.
    """

    thetas: tuple[float, ...]
    times: tuple[float, ...]
    samples: tuple[tuple[float, float, float, float, float], ...]
    h0_norm: float
    variation_ratio: float
    direct_ratio: float
    homotopy_margin: float
    tol: float

    def __post_init__(self) -> None:
        if len(self.samples) != len(self.thetas) * len(self.times):
            raise ValueError("need one sample row per (theta, time) pair")

    @property
    def passed(self) -> bool:
        return self.homotopy_margin >= -self.tol


def _pair_l1(a: FieldPair, b: FieldPair) -> float:
    return (integral_l1(Field(a.grid, a.u1.values - b.u1.values))
            + integral_l1(Field(a.grid, a.u2.values - b.u2.values)))


def _norm_pair(h: FieldPair) -> float:
    return integral_l1(h.u1) + integral_l1(h.u2)


def _default_delta1(m: ModelSpec, data: list[FieldPair]) -> float:
    amp = max(float(np.abs(u.u1.values - m.u_star[0]).max()) for u in data)
    return default_delta1(m, amp)


def homotopy_stability(m: ModelSpec, ubar: FieldPair, vbar: FieldPair,
                       n_theta: int, cfg: SolverConfig, *,
                       delta1: float | None = None,
                       tol_fraction: float = 0.02,
                       s_backend: str = "gamma") -> StabilityReport:
    """Solve along the affine path between vbar (theta=0) and ubar (theta=1).

    Each theta gets a nonlinear base solve and a linearized solve started
    from h(0) = ubar - vbar; the report collects the decomposed variation
    norms at every snapshot.  tol_fraction sets the integral-bound tolerance
    as a fraction of ||ubar - vbar||_L1.
    """
    if ubar.grid != vbar.grid:
        raise ValueError("homotopy endpoints live on different grids")
    if n_theta < 3:
        raise ValueError(f"need at least 3 homotopy points, got {n_theta}")
    if delta1 is None:
        delta1 = _default_delta1(m, [ubar, vbar])
    theta_cut = CutoffTheta(delta1)

    h0 = FieldPair(Field(ubar.grid, ubar.u1.values - vbar.u1.values),
                   Field(ubar.grid, ubar.u2.values - vbar.u2.values))
    h0_norm = _norm_pair(h0)

    thetas = np.linspace(0.0, 1.0, n_theta)
    samples: list[tuple[float, float, float, float, float]] = []
    norm_table: list[list[float]] = []
    endpoints: dict[float, SolveRun] = {}
    times: tuple[float, ...] | None = None
    for th in thetas:
        data = FieldPair(
            Field(ubar.grid, th * ubar.u1.values + (1.0 - th) * vbar.u1.values),
            Field(ubar.grid, th * ubar.u2.values + (1.0 - th) * vbar.u2.values))
        try:
            base = solve(m, data, cfg)
            h_run = solve_linearized(m, base, h0)
        except BlowupError as exc:
            raise BlowupError(
                f"homotopy member theta={th:.6g} blew up: {exc}", exc.t) from exc
        if th in (0.0, 1.0):
            endpoints[float(th)] = base
        times = base.times
        frames = frames_for_run(base, m, theta_cut, s_backend)
        row = []
        for frame, (t, h_t) in zip(frames, h_run.snapshots):
            hf = with_h(frame, h_t)
            norm_h = _norm_pair(h_t)
            samples.append((float(th), float(t), norm_h,
                            integral_l1(hf.h1), integral_l1(hf.h2)))
            row.append(norm_h)
        norm_table.append(row)

    norms = np.array(norm_table)           # (n_theta, n_times)
    direct = np.array([_pair_l1(endpoints[1.0].snapshots[i][1],
                                endpoints[0.0].snapshots[i][1])
                       for i in range(len(times))])
    integral = np.trapezoid(norms, thetas, axis=0)
    if h0_norm > 0.0:
        variation_ratio = float(norms.max() / h0_norm)
        direct_ratio = float(direct.max() / h0_norm)
    else:
        variation_ratio = 0.0
        direct_ratio = 0.0
    return StabilityReport(
        thetas=tuple(float(t) for t in thetas),
        times=tuple(times),
        samples=tuple(samples),
        h0_norm=h0_norm,
        variation_ratio=variation_ratio,
        direct_ratio=direct_ratio,
        homotopy_margin=float((integral - direct).min()),
        tol=tol_fraction * h0_norm,
    )


def hhat_diagnostics(base: SolveRun, h_run: SolveRun, m: ModelSpec, *,
                     delta1: float | None = None,
                     s_backend: str = "gamma") -> list[FunctionalSeries]:
    """Mixed-gradient series of a decomposed variation along its base run.

    Emits six cumulative series (the h1/v1, h1/w1, hhat1/v1 first-order
    wronskians, the two second-order ones, and the gated h-energy) plus the
    instantaneous series "hhat_identity_residual": the L1 norm of

        (hhat1_x v1 - hhat1 v1_x) + (h1_x w1 - h1 w1_x)
          - a1 (h1_xx v1 - h1 v1_xx) - (a1' v1 - 2 lam_eff)(h1_x v1 - h1 v1_x)

    which vanishes in the continuum and is O(dx^2) discretely.
    """
    if base.grid != h_run.grid:
        raise ValueError("runs live on different grids")
    if len(base.snapshots) != len(h_run.snapshots) or any(
            abs(ta - tb) > 1e-12 * max(1.0, abs(ta))
            for (ta, _), (tb, _) in zip(base.snapshots, h_run.snapshots)):
        raise ValueError("base and variation snapshots are misaligned")
    if delta1 is None:
        delta1 = _default_delta1(m, [base.snapshots[0][1]])

    frames = frames_for_run(base, m, CutoffTheta(delta1), s_backend)
    hframes = [with_h(frame, h_t) for frame, (_, h_t) in zip(frames, h_run.snapshots)]

    names = ("h1_v1_wronskian", "h1_w1_wronskian", "hhat1_v1_wronskian",
             "h1xx_v1_wronskian", "h1xx_w1_wronskian")
    ts: list[float] = []
    rates: dict[str, list[float]] = {name: [] for name in names}
    residuals: list[float] = []
    for f in hframes:
        dx = f.v1.grid.dx
        v1, w1 = f.v1.values, f.w1.values
        h1, hhat1 = f.h1.values, f.hhat1.values
        d_h1, d_v1 = d_dx(f.h1).values, d_dx(f.v1).values
        d_w1, d_hhat1 = d_dx(f.w1).values, d_dx(f.hhat1).values
        dd_h1 = d_dx(d_dx(f.h1)).values
        dd_v1 = d_dx(d_dx(f.v1)).values
        dd_w1 = d_dx(d_dx(f.w1)).values

        wr_v = d_h1 * v1 - h1 * d_v1
        wr_w = d_h1 * w1 - h1 * d_w1
        wr_hat = d_hhat1 * v1 - hhat1 * d_v1
        wr_xx_v = dd_h1 * v1 - h1 * dd_v1
        wr_xx_w = dd_h1 * w1 - h1 * dd_w1
        for name, integrand in zip(names, (wr_v, wr_w, wr_hat, wr_xx_v, wr_xx_w)):
            rates[name].append(float(np.sum(np.abs(integrand)) * dx))

        a1 = f.alpha1_eff.values
        advect = f.alpha1_prime_eff.values * v1 - 2.0 * f.lam1_eff.values
        resid = wr_hat + wr_w - a1 * wr_xx_v - advect * wr_v
        residuals.append(float(np.sum(np.abs(resid)) * dx))
        ts.append(f.t)

    series = [_cumulative(name, ts, rates[name]) for name in names]
    series.append(energy_term(hframes, CutoffThetaHat(delta1), which="h"))
    series.append(FunctionalSeries(name="hhat_identity_residual",
                                   samples=tuple(zip(ts, residuals)),
                                   kind="instantaneous"))
    return series


def write_stability_csv(report: StabilityReport, path) -> None:
    """Serialize the homotopy samples as "theta,t,norm_h,norm_h1,norm_h2"."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("theta,t,norm_h,norm_h1,norm_h2\n")
        for th, t, nh, nh1, nh2 in report.samples:
            fh.write(f"{th:.17g},{t:.17g},{nh:.17g},{nh1:.17g},{nh2:.17g}\n")
