"""Gradient decomposition of a state into wave-aligned diagnostic variables.

From a snapshot u the module computes

    v1 = d_dx(u1)                      first-family gradient strength
    w1 = a1 d_dx(v1) - lam1_eff v1     its flux-form companion (a1 = eps*alpha1)
    z1 = a1 d_dx(w1) - lam1_eff w1     second-level companion
    sigma1 = lam1* + theta(-w1~/v1)    guarded local wave speed
    v2 = d_dx(u2) - s * v1             transversal gradient strength

where lam1_eff = lambda1 - eps*alpha1' v1, w1~ = w1 + lambda1(u*) v1, and s is
the traveling-wave manifold slope (gamma(u) at leading order).  All discrete
derivatives are core.d_dx, so the exact Wronskian identity relating z1, w1
and v1 holds to rounding when the coefficient fields are constant.

Every expression containing the ratio w1/v1 is multiplied by an indicator
that vanishes outside {|w1| <= 3 delta1 |v1|}, so no small-denominator
division ever occurs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import Field, FieldPair, d_dx
from .model import ModelDomainError, ModelSpec

__all__ = [
    "CutoffTheta",
    "CutoffThetaHat",
    "DecompFrame",
    "default_delta1",
    "compute_frame",
    "frames_for_run",
    "s_eval",
    "phi2_residual",
    "source_bounds",
    "identity_residual",
    "decompose_h",
    "compute_hhat",
    "write_frames_csv",
]


def _sample_check(fn: Callable[[np.ndarray], np.ndarray], xs: np.ndarray,
                  bound: float, label: str) -> None:
    worst = float(np.max(np.abs(fn(xs))))
    if worst > bound * (1 + 1e-12):
        raise ValueError(f"cutoff bound violated: sup|{label}| = {worst:.6g} > {bound:.6g}")


@dataclass(frozen=True)
class CutoffTheta:
    """Odd saturating cutoff: identity on [-delta1, delta1], zero outside
    3*delta1, C^1 transition with a piecewise-linear derivative profile.

    The derivative runs 1 -> -5/6 on [delta1, 1.5 delta1], stays at -5/6 on
    [1.5 delta1, 2.5 delta1], and returns to 0 on [2.5 delta1, 3 delta1];
    the -5/6 plateau is the unique level making the total drop equal delta1.
    Bounds |theta| <= 2 delta1, |theta'| <= 1, |theta''| <= 16/delta1 are
    verified by dense sampling at construction.
    """

    delta1: float

    def __post_init__(self):
        if not (self.delta1 > 0 and np.isfinite(self.delta1)):
            raise ValueError(f"delta1 must be positive, got {self.delta1}")
        d1 = self.delta1
        xs = np.linspace(-4 * d1, 4 * d1, 4097)
        _sample_check(self.value, xs, 2 * d1, "theta")
        _sample_check(self.deriv, xs, 1.0, "theta'")
        _sample_check(self.deriv2, xs, 16.0 / d1, "theta''")
        inner = np.linspace(-d1, d1, 257)
        if np.max(np.abs(self.value(inner) - inner)) > 0:
            raise ValueError("theta must equal the identity on [-delta1, delta1]")

    def _transition(self, xi: np.ndarray) -> np.ndarray:
        # xi = x - delta1 in [0, 2 delta1]; returns theta on the right transition
        d1 = self.delta1
        q = 0.5 * d1
        m1 = -11.0 / (3.0 * d1)
        m3 = 5.0 / (3.0 * d1)
        out = np.empty_like(xi)
        s1 = xi <= q
        s2 = (xi > q) & (xi <= 3 * q)
        s3 = xi > 3 * q
        out[s1] = d1 + xi[s1] + 0.5 * m1 * xi[s1] ** 2
        out[s2] = (25.0 / 24.0) * d1 - (5.0 / 6.0) * (xi[s2] - q)
        r = xi[s3] - 3 * q
        out[s3] = (5.0 / 24.0) * d1 - (5.0 / 6.0) * r + 0.5 * m3 * r**2
        return out

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        d1 = self.delta1
        out = np.where(ax <= d1, x, 0.0)
        mask = (ax > d1) & (ax < 3 * d1)
        if mask.any():
            out = np.array(out, dtype=float)
            out[mask] = np.sign(x[mask]) * self._transition(ax[mask] - d1)
        return out

    def deriv(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        d1 = self.delta1
        q = 0.5 * d1
        xi = ax - d1
        out = np.zeros_like(ax)
        out[ax <= d1] = 1.0
        s1 = (ax > d1) & (xi <= q)
        s2 = (ax > d1) & (xi > q) & (xi <= 3 * q)
        s3 = (ax > d1) & (xi > 3 * q) & (ax < 3 * d1)
        out[s1] = 1.0 - (11.0 / (3.0 * d1)) * xi[s1]
        out[s2] = -5.0 / 6.0
        out[s3] = -5.0 / 6.0 + (5.0 / (3.0 * d1)) * (xi[s3] - 3 * q)
        return out

    def deriv2(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        d1 = self.delta1
        q = 0.5 * d1
        xi = ax - d1
        out = np.zeros_like(ax)
        s1 = (ax > d1) & (xi < q)
        s3 = (ax > d1) & (xi > 3 * q) & (ax < 3 * d1)
        out[s1] = -11.0 / (3.0 * d1)
        out[s3] = 5.0 / (3.0 * d1)
        return out * np.sign(x)


@dataclass(frozen=True)
class CutoffThetaHat:
    """Step-like gate: 0 on |x| <= 3 delta1/5, 1 on |x| >= 4 delta1/5.

    The connection is the continuous linear ramp; its almost-everywhere
    derivatives satisfy delta1*|theta_hat'| = 5 and theta_hat'' = 0, inside
    the required 16 bounds.  (No C^1 connection over this window can satisfy
    the second-derivative bound: 1 = double integral of theta_hat'' needs
    max |theta_hat''| >= 2/width^2 = 50/delta1^2.)
    """

    delta1: float

    def __post_init__(self):
        if not (self.delta1 > 0 and np.isfinite(self.delta1)):
            raise ValueError(f"delta1 must be positive, got {self.delta1}")
        d1 = self.delta1
        xs = np.linspace(-2 * d1, 2 * d1, 4097)
        _sample_check(self.deriv, xs, 16.0 / d1, "theta_hat'")
        _sample_check(self.deriv2, xs, 16.0 / d1**2, "theta_hat''")
        vals = self.value(xs)
        if np.any(np.diff(self.value(np.linspace(0, 2 * d1, 1025))) < -1e-15):
            raise ValueError("theta_hat must be monotone in |x|")
        if vals.min() < 0 or vals.max() > 1:
            raise ValueError("theta_hat must take values in [0, 1]")

    def value(self, x) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=float))
        lo = 0.6 * self.delta1
        hi = 0.8 * self.delta1
        return np.clip((ax - lo) / (hi - lo), 0.0, 1.0)

    def deriv(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inside = (ax > 0.6 * self.delta1) & (ax < 0.8 * self.delta1)
        return np.where(inside, np.sign(x) * 5.0 / self.delta1, 0.0)

    def deriv2(self, x) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))


def default_delta1(m: ModelSpec, delta0: float) -> float:
    """Wave-speed spread allowance: grows with data size and coefficient slopes."""
    sups = m.coefficient_sups()
    return max(10.0 * sups["sup_abs_dlambda1"] * delta0
               + 2.0 * delta0 * sups["sup_abs_dalpha1"], 0.05)


@dataclass(frozen=True)
class DecompFrame:
    t: float
    v1: Field
    v2: Field
    w1: Field
    z1: Field
    sigma1: Field
    s: Field
    lam1_star: float
    delta1: float
    # effective coefficient fields (viscosity scale folded in) for residuals
    alpha1_eff: Field
    alpha1_prime_eff: Field
    lam1_eff: Field
    alpha2_eff: Field
    lam2_eff: Field
    source_terms: dict
    phi2_residual: Field | None = None
    h1: Field | None = None
    h2: Field | None = None
    hhat1: Field | None = None

    @property
    def w1_tilde(self) -> Field:
        return self.w1.with_values(self.w1.values + self.lam1_star * self.v1.values)


def _profile_slope_ode(m: ModelSpec, u, v1: float, sigma: float) -> float:
    # deferred import: travelingwave imports this module for the probe
    from .travelingwave import extract_manifold_slope

    return extract_manifold_slope(m, u, v1, sigma)


def s_eval(m: ModelSpec, u, v1: float, sigma: float, backend: str = "gamma",
           eps_nbhd: float = 0.05, delta1: float = 0.05) -> float:
    """Slope of the traveling-wave gradient direction (1, s) at one state."""
    u1, u2 = float(u[0]), float(u[1])
    du = max(abs(u1 - m.u_star[0]), abs(u2 - m.u_star[1]))
    lam_star = float(m.lambda1(*m.u_star))
    if du > eps_nbhd or abs(v1) > eps_nbhd or abs(sigma - lam_star) > 2 * delta1:
        raise ValueError(
            f"state outside manifold neighborhood: |u-u*|={du:.3g}, "
            f"|v1|={abs(v1):.3g}, |sigma-lambda1*|={abs(sigma - lam_star):.3g}")
    if backend == "gamma" or v1 == 0.0:
        return float(m.gamma(u1, u2))
    if backend == "ode":
        return _profile_slope_ode(m, (u1, u2), v1, sigma)
    raise ValueError(f"unknown s backend {backend!r}")


def compute_frame(u: FieldPair, m: ModelSpec, theta: CutoffTheta,
                  s_backend: str = "gamma", eps: float = 1.0,
                  t: float = 0.0) -> DecompFrame:
    """Diagnostic variables of one snapshot; pure, O(n) except the ode backend."""
    grid = u.grid
    u1 = u.u1.values
    u2 = u.u2.values
    d1 = theta.delta1

    (lo1, hi1), (lo2, hi2) = m.validation_box
    if (u1.min() < lo1 or u1.max() > hi1 or u2.min() < lo2 or u2.max() > hi2):
        raise ModelDomainError(
            f"snapshot leaves validation box {m.validation_box} of model {m.name}")

    v1 = d_dx(u.u1).values
    a1 = eps * np.broadcast_to(m.alpha1.value(u1, u2), u1.shape)
    a1p = eps * np.broadcast_to(m.alpha1.d1(u1, u2), u1.shape)
    lam1 = np.broadcast_to(m.lambda1(u1, u2), u1.shape)
    lam_eff = lam1 - a1p * v1
    w1 = a1 * d_dx(Field(grid, v1)).values - lam_eff * v1
    z1 = a1 * d_dx(Field(grid, w1)).values - lam_eff * w1

    lam_star = float(m.lambda1(*m.u_star))
    w1t = w1 + lam_star * v1
    sigma1 = np.full_like(v1, lam_star)
    live = np.abs(w1t) < 3 * d1 * np.abs(v1)
    if live.any():
        sigma1[live] += theta.value(-w1t[live] / v1[live])

    if s_backend == "gamma":
        s = np.asarray(m.gamma(u1, u2), dtype=float)
        s = np.broadcast_to(s, u1.shape).copy()
    elif s_backend == "ode":
        s = np.empty_like(u1)
        for i in range(len(s)):
            if v1[i] == 0.0:
                s[i] = float(m.gamma(u1[i], u2[i]))
            else:
                s[i] = _profile_slope_ode(m, (u1[i], u2[i]), float(v1[i]),
                                          float(sigma1[i]))
    else:
        raise ValueError(f"unknown s backend {s_backend!r}")

    v2 = d_dx(u.u2).values - s * v1
    a2 = eps * m.alpha2.value(u1, u2)
    lam2_eff = m.lambda2(u1, u2) - eps * m.alpha2.d2(u1, u2) * v2

    F = lambda vals: Field(grid, vals)
    frame = DecompFrame(
        t=float(t),
        v1=F(v1), v2=F(v2), w1=F(w1), z1=F(z1), sigma1=F(sigma1), s=F(s),
        lam1_star=lam_star,
        delta1=d1,
        alpha1_eff=F(a1), alpha1_prime_eff=F(a1p), lam1_eff=F(lam_eff),
        alpha2_eff=F(a2), lam2_eff=F(lam2_eff),
        source_terms={},
    )
    return replace(frame, source_terms=source_bounds(frame, m))


def frames_for_run(run, m: ModelSpec, theta: CutoffTheta,
                   s_backend: str = "gamma") -> list[DecompFrame]:
    """Frame per snapshot, with the two-time residual attached to the later frame."""
    eps = run.config.epsilon
    frames = [compute_frame(u, m, theta, s_backend, eps=eps, t=t)
              for t, u in run.snapshots]
    out = [frames[0]]
    for fa, fb in zip(frames, frames[1:]):
        out.append(replace(fb, phi2_residual=phi2_residual(fa, fb, m)))
    return out


def phi2_residual(frame_a: DecompFrame, frame_b: DecompFrame, m: ModelSpec) -> Field:
    """Discrete residual of the transversal-gradient balance law.

    Evaluates dv2/dt + d_dx(lam2_eff * v2) - d_dx(alpha2_eff * d_dx v2) at the
    midpoint of two consecutive frames; whatever is left over is the numerical
    stand-in for the interaction source acting on v2.
    """
    if frame_b.t <= frame_a.t:
        raise ValueError(f"frames out of order: t={frame_a.t} then t={frame_b.t}")
    if frame_a.v1.grid != frame_b.v1.grid:
        raise ValueError("frames live on different grids")
    grid = frame_a.v1.grid
    dt = frame_b.t - frame_a.t
    v2m = 0.5 * (frame_a.v2.values + frame_b.v2.values)
    lam = 0.5 * (frame_a.lam2_eff.values + frame_b.lam2_eff.values)
    a2 = 0.5 * (frame_a.alpha2_eff.values + frame_b.alpha2_eff.values)
    ddt = (frame_b.v2.values - frame_a.v2.values) / dt
    conv = d_dx(Field(grid, lam * v2m)).values
    diff = d_dx(Field(grid, a2 * d_dx(Field(grid, v2m)).values)).values
    return Field(grid, ddt + conv - diff)


def source_bounds(frame: DecompFrame, m: ModelSpec) -> dict:
    """One field per source class, each guarded against small v1 denominators."""
    delta1 = frame.delta1
    grid = frame.v1.grid
    v1 = frame.v1.values
    v2 = frame.v2.values
    w1 = frame.w1.values
    sigma1 = frame.sigma1.values
    v1x = d_dx(frame.v1).values
    v2x = d_dx(frame.v2).values
    w1x = d_dx(frame.w1).values
    w1xx = d_dx(Field(grid, w1x)).values
    v1xx = d_dx(Field(grid, v1x)).values

    live = np.abs(w1) <= 3 * delta1 * np.abs(v1)
    live &= v1 != 0.0
    ratio = np.zeros_like(v1)
    ratio[live] = w1[live] / v1[live]
    ratio_x = d_dx(Field(grid, ratio)).values

    F = lambda vals: Field(grid, vals)
    return {
        "v1x_wave_offset": F(v1x * (w1 + sigma1 * v1)),
        "w1_v1_wronskian": F(w1 * v1x - w1x * v1),
        "ratio_grad_sq": F(np.where(live, v1**2 * ratio_x**2, 0.0)),
        "v1_v2": F(v1 * v2),
        "v1x_v2": F(v1x * v2),
        "v2x_v1": F(v2x * v1),
        "w1xx_v1_wronskian": F(w1xx * v1 - w1 * v1xx),
    }


def identity_residual(frame: DecompFrame) -> Field:
    """Exact discrete Wronskian identity among (v1, w1, z1).

    With D the module's derivative and constant coefficient fields this is
    zero to rounding; with variable coefficients it is O(dx^2):

        D(z1) v1 - D(v1) z1
          = a1 (D(D(w1)) v1 - w1 D(D(v1))) + (a1' v1 - 2 lam_eff) (D(w1) v1 - D(v1) w1)
    """
    grid = frame.v1.grid
    v1, w1, z1 = frame.v1.values, frame.w1.values, frame.z1.values
    a1 = frame.alpha1_eff.values
    a1p = frame.alpha1_prime_eff.values
    lam = frame.lam1_eff.values
    v1x = d_dx(frame.v1).values
    w1x = d_dx(frame.w1).values
    z1x = d_dx(frame.z1).values
    w1xx = d_dx(Field(grid, w1x)).values
    v1xx = d_dx(Field(grid, v1x)).values
    lhs = z1x * v1 - v1x * z1
    rhs = a1 * (w1xx * v1 - w1 * v1xx) + (a1p * v1 - 2.0 * lam) * (w1x * v1 - v1x * w1)
    return Field(grid, lhs - rhs)


def decompose_h(frame: DecompFrame, h: FieldPair) -> tuple[Field, Field]:
    """Split a first variation along the frame's wave directions (1, s) and (0, 1)."""
    if h.grid != frame.v1.grid:
        raise ValueError("perturbation grid does not match the frame")
    h1 = h.u1
    h2 = h.u2.with_values(h.u2.values - frame.s.values * h.u1.values)
    return h1, h2


def with_h(frame: DecompFrame, h: FieldPair) -> DecompFrame:
    """Frame enriched with the decomposed first variation and its companion."""
    h1, h2 = decompose_h(frame, h)
    enriched = replace(frame, h1=h1, h2=h2)
    return replace(enriched, hhat1=compute_hhat(enriched))


def compute_hhat(hframe: DecompFrame, m: ModelSpec | None = None) -> Field:
    """Companion of h1, built exactly like w1 is built from v1.

    The frame already carries the frozen coefficient fields, so the model
    argument is optional and accepted only for call-site symmetry.
    """
    if hframe.h1 is None:
        raise ValueError("frame carries no h1; decompose a perturbation first")
    a1 = hframe.alpha1_eff.values
    lam = hframe.lam1_eff.values
    h1 = hframe.h1.values
    return Field(hframe.v1.grid, a1 * d_dx(hframe.h1).values - lam * h1)


def write_frames_csv(frames: list[DecompFrame], path) -> None:
    with_h_cols = all(f.h1 is not None for f in frames) and len(frames) > 0
    header = "t,x,v1,v2,w1,z1,sigma1"
    if with_h_cols:
        header += ",h1,h2,hhat1"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for f in frames:
            xs = f.v1.grid.centers
            cols = [f.v1.values, f.v2.values, f.w1.values, f.z1.values, f.sigma1.values]
            if with_h_cols:
                cols += [f.h1.values, f.h2.values, f.hhat1.values]
            for i, x in enumerate(xs):
                row = ",".join(f"{c[i]:.17g}" for c in cols)
                fh.write(f"{f.t:.17g},{x:.17g},{row}\n")
