"""Inviscid baseline and the epsilon-sweep evidence for the small-viscosity limit.

The inviscid reference is a first-order Rusanov (local Lax-Friedrichs)
finite-volume solve of u_t + F(u)_x = 0 with the face speed bounded by the
larger characteristic speed of the two adjacent cells.  Deliberately not
Godunov: an exact Riemann solver for the coupled pair needs case analysis the
triangular structure does not hand us, while Rusanov is monotone (hence TVD)
on the scalar first component and diffuses the second no worse.  The primary
convergence evidence is the Cauchy-in-epsilon pairwise gap sequence; the gap
to the inviscid reference and its log-log rate fit corroborate it.

Every run of one sweep shares a single grid sized for the smallest viscosity
(dx <= eps_min / 4), so grid error cannot masquerade as an epsilon effect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .core import Field, FieldPair, Grid1D, integral_l1
from .model import ModelSpec
from .solver import BlowupError, SolverConfig, SolveRun, _check_admissible, solve

__all__ = [
    "SweepResult",
    "solve_inviscid",
    "epsilon_sweep",
    "time_continuity_probe",
    "write_sweep_csv",
]


def _check_halving_chain(eps: tuple[float, ...]) -> None:
    if len(eps) < 2:
        raise ValueError("need at least two viscosities in the chain")
    if any(e <= 0.0 for e in eps):
        raise ValueError("viscosities must be positive")
    for hi, lo in zip(eps, eps[1:]):
        if abs(hi - 2.0 * lo) > 1e-12 * hi:
            raise ValueError(
                f"viscosities must halve along the chain, got {hi:.6g} -> {lo:.6g}")


@dataclass(frozen=True)
class SweepResult:
    """Gaps along a halving chain of viscosities, plus the fitted decay rate.

    pairwise_gaps[i] is keyed by the larger viscosity of the pair (eps_i,
    eps_i / 2), so it is one entry shorter than epsilons.  fitted_rate is the
    log-log slope of the inviscid gaps against epsilon, nan when a zero gap
    makes the fit meaningless (constant data, say).
    """

    epsilons: tuple[float, ...]
    pairwise_gaps: tuple[tuple[float, float], ...]
    inviscid_gaps: tuple[tuple[float, float], ...]
    fitted_rate: float

    def __post_init__(self) -> None:
        eps = tuple(float(e) for e in self.epsilons)
        _check_halving_chain(eps)
        if len(self.pairwise_gaps) != len(eps) - 1:
            raise ValueError("need one pairwise gap per adjacent viscosity pair")
        if len(self.inviscid_gaps) != len(eps):
            raise ValueError("need one inviscid gap per viscosity")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(
            self, "pairwise_gaps",
            tuple((float(e), float(g)) for e, g in self.pairwise_gaps))
        object.__setattr__(
            self, "inviscid_gaps",
            tuple((float(e), float(g)) for e, g in self.inviscid_gaps))


def _l1_gap(a: FieldPair, b: FieldPair) -> float:
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    return (integral_l1(Field(a.grid, a.u1.values - b.u1.values))
            + integral_l1(Field(a.grid, a.u2.values - b.u2.values)))


def solve_inviscid(m: ModelSpec, u0: FieldPair, t_end: float, n: int) -> FieldPair:
    """March u_t + F(u)_x = 0 to t_end with first-order Rusanov fluxes.

    The data are resampled onto an n-cell copy of u0's domain when n differs
    from the input resolution.  Zero-gradient ghost cells, advective CFL
    number 0.45, and the last step lands exactly on t_end.  Raises
    BlowupError if the state goes non-finite or leaves the validation box.
    """
    if t_end < 0.0:
        raise ValueError(f"t_end must be nonnegative, got {t_end}")
    if n == u0.grid.n:
        grid = u0.grid
        u1 = u0.u1.values.copy()
        u2 = u0.u2.values.copy()
    else:
        grid = Grid1D(u0.grid.x_min, u0.grid.x_max, n)
        u1 = np.interp(grid.centers, u0.grid.centers, u0.u1.values)
        u2 = np.interp(grid.centers, u0.grid.centers, u0.u2.values)
    _check_admissible(m, u1, u2, 0.0)

    dx = grid.dx
    t = 0.0
    while t < t_end - 1e-14 * max(1.0, t_end):
        v1 = np.concatenate(([u1[0]], u1, [u1[-1]]))
        v2 = np.concatenate(([u2[0]], u2, [u2[-1]]))
        speed = np.maximum(np.abs(m.lambda1(v1, v2)), np.abs(m.lambda2(v1, v2)))
        a_face = np.maximum(speed[:-1], speed[1:])
        amax = float(a_face.max())
        remaining = t_end - t
        dt = remaining if amax <= 0.0 else min(0.45 * dx / amax, remaining)
        landing = dt >= remaining * (1.0 - 1e-12)
        if landing:
            dt = remaining
        fv = m.f.value(v1, v2)
        gv = m.g.value(v1, v2)
        flux1 = 0.5 * (fv[:-1] + fv[1:]) - 0.5 * a_face * (v1[1:] - v1[:-1])
        flux2 = 0.5 * (gv[:-1] + gv[1:]) - 0.5 * a_face * (v2[1:] - v2[:-1])
        u1 = u1 - (dt / dx) * (flux1[1:] - flux1[:-1])
        u2 = u2 - (dt / dx) * (flux2[1:] - flux2[:-1])
        t = t_end if landing else t + dt
        _check_admissible(m, u1, u2, t)
    return FieldPair(Field(grid, u1), Field(grid, u2))


def epsilon_sweep(m: ModelSpec, u0: FieldPair, eps_list, t_end: float) -> SweepResult:
    """Viscous solves along a halving chain of epsilons, all on u0's grid.

    Computes the L1 gap between each adjacent pair of finals and between each
    final and the inviscid reference at the same resolution, then fits the
    rate p in (inviscid gap) ~ C * eps^p by least squares on the logs.  The
    grid must resolve the smallest viscosity: dx <= eps_min / 4.
    """
    eps = tuple(float(e) for e in eps_list)
    _check_halving_chain(eps)
    dx = u0.grid.dx
    if dx > eps[-1] / 4.0 + 1e-15:
        raise ValueError(
            f"grid spacing {dx:.6g} does not resolve the smallest viscosity "
            f"{eps[-1]:.6g}; need dx <= {eps[-1] / 4.0:.6g}")

    finals: list[FieldPair] = []
    for e in eps:
        try:
            run = solve(m, u0, SolverConfig(epsilon=e, t_end=t_end))
        except BlowupError as exc:
            raise BlowupError(f"sweep member eps={e:.6g} blew up: {exc}", exc.t) from exc
        finals.append(run.final())
    u_ref = solve_inviscid(m, u0, t_end, u0.grid.n)

    pairwise = tuple(
        (eps[i], _l1_gap(finals[i], finals[i + 1])) for i in range(len(eps) - 1))
    inviscid = tuple((e, _l1_gap(f, u_ref)) for e, f in zip(eps, finals))
    gaps = np.array([g for _, g in inviscid])
    if np.all(gaps > 0.0):
        rate = float(np.polyfit(np.log(np.array(eps)), np.log(gaps), 1)[0])
    else:
        rate = float("nan")
    return SweepResult(epsilons=eps, pairwise_gaps=pairwise,
                       inviscid_gaps=inviscid, fitted_rate=rate)


def time_continuity_probe(run: SolveRun, eps: float) -> tuple[float, float]:
    """Smallest (L_a, L_b) covering every snapshot pair of the run with
    ||u(t) - u(s)||_1 <= L_a |t - s| + L_b sqrt(eps) |sqrt(t) - sqrt(s)|.

    A nonnegative least-squares fit over all pairs sets the direction of
    (L_a, L_b); the pair is then scaled by the one factor that makes the
    bound tight on the worst pair.  The run should cluster snapshots near
    t = 0, where the square-root term carries the distance; with fewer than
    20 snapshots the fit is noise and the probe refuses to run.
    """
    if eps <= 0.0:
        raise ValueError(f"viscosity must be positive, got {eps}")
    snaps = run.snapshots
    if len(snaps) < 20:
        raise ValueError(
            f"need at least 20 snapshots for the continuity fit, run has {len(snaps)}")
    times = np.array([t for t, _ in snaps])
    roots = np.sqrt(eps) * np.sqrt(times)

    dists, basis = [], []
    for i in range(len(snaps)):
        for j in range(i + 1, len(snaps)):
            dists.append(_l1_gap(snaps[i][1], snaps[j][1]))
            basis.append((abs(times[j] - times[i]), abs(roots[j] - roots[i])))
    d = np.array(dists)
    A = np.array(basis)
    if not d.any():
        return (0.0, 0.0)

    coef, _ = scipy.optimize.nnls(A, d)
    pred = A @ coef
    covered = d > 0.0
    # distinct snapshot times give a strictly positive row, so pred > 0 there
    scale = float(np.max(d[covered] / pred[covered]))
    return (float(scale * coef[0]), float(scale * coef[1]))


def write_sweep_csv(result: SweepResult, path) -> None:
    """Serialize a sweep as CSV rows "eps,pairwise_gap,inviscid_gap".

    The smallest viscosity has no halving partner, so its pairwise column is
    nan.  The fitted rate rides along as a trailing comment row rather than
    pretending to be another viscosity.
    """
    pair = dict(result.pairwise_gaps)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("eps,pairwise_gap,inviscid_gap\n")
        for e, g_inv in result.inviscid_gaps:
            fh.write(f"{e:.17g},{pair.get(e, float('nan')):.17g},{g_inv:.17g}\n")
        fh.write(f"# fitted_rate,{result.fitted_rate:.17g}\n")
