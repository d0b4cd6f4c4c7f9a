"""Viscous traveling-wave profiles and a numerical probe of the slow manifold.

A profile u(t,x) = U(x - sigma*t) satisfies (B(U)U')' = ((A(U) - sigma)U')
pointwise; integrating once from the left state gives the reduced first-order
system

    B(U) U' = F(U) - sigma*U - c,      c = F(u_minus) - sigma*u_minus,

whose equilibria are exactly the states Rankine-Hugoniot related to u_minus.
shoot_connection fixes sigma by a secant iteration on the requested wave-curve
distance and then realizes the heteroclinic orbit by integrating the reduced
system backward from the arriving end, where every transversal mode decays.
Integrating forward from the departing end instead would amplify transversal
errors by exp(rate * span), which overflows for any usable span; the backward
route makes the connection numerically stable end to end.

The second-order phase-space form (u' = v, B v' = (A - sigma)v - (v . DB)v)
is exposed for direct integration and for the short-arc slope extraction
behind the ode backend of decomposition.s_eval: transversal deviations from
the slow manifold grow at rate (lambda2 - lambda1)/alpha2 along a forward
arc, so driving the far-end deviation to zero by a secant in the slope pins
the manifold slope at the base point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import Field, FieldPair, Grid1D
from .model import ModelDomainError, ModelSpec

__all__ = [
    "ProfileODEState",
    "WaveProfile",
    "ProbeReport",
    "integrate_profile",
    "shoot_connection",
    "extract_manifold_slope",
    "extract_manifold_slopes",
    "manifold_probe",
    "profile_flux_residual",
    "write_profile_csv",
    "write_probe_csv",
]

_FAMILIES = ("one", "two")


@dataclass(frozen=True)
class ProfileODEState:
    """Phase-space point of the profile system; sigma is constant along orbits."""

    u: np.ndarray
    v: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(2))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(2))
        if not np.isfinite(self.u).all() or not np.isfinite(self.v).all():
            raise ValueError("profile state must be finite")


@dataclass(frozen=True, eq=False)
class WaveProfile:
    sigma: float
    family: str
    xi: np.ndarray
    u: np.ndarray  # shape (n, 2)
    v: np.ndarray  # shape (n, 2)
    exited_box: bool = False

    @property
    def samples(self) -> list:
        return [(float(self.xi[i]), self.u[i].copy(), self.v[i].copy())
                for i in range(len(self.xi))]

    @property
    def u_left(self) -> np.ndarray:
        return self.u[0]

    @property
    def u_right(self) -> np.ndarray:
        return self.u[-1]

    def state_on_grid(self, grid: Grid1D, shift: float = 0.0) -> FieldPair:
        """Profile sampled at cell centers, translated by shift, constant tails."""
        x = grid.centers - shift
        u1 = np.interp(x, self.xi, self.u[:, 0])
        u2 = np.interp(x, self.xi, self.u[:, 1])
        return FieldPair(Field(grid, u1), Field(grid, u2))


def _phase_rhs(m: ModelSpec, sigma: float):
    """Right-hand side of u' = v, B(u) v' = (A(u) - sigma)v - (v . DB(u))v."""

    def rhs(_xi, y):
        u1, u2, v1, v2 = y
        a1 = m.alpha1.value(u1, u2)
        a2 = m.alpha2.value(u1, u2)
        da1 = v1 * m.alpha1.d1(u1, u2) + v2 * m.alpha1.d2(u1, u2)
        da2 = v1 * m.alpha2.d1(u1, u2) + v2 * m.alpha2.d2(u1, u2)
        db1, db2 = m.beta_grad(u1, u2)
        db = v1 * db1 + v2 * db2
        p1 = (m.lambda1(u1, u2) - sigma) * v1 - da1 * v1
        p2 = (m.g.d1(u1, u2) * v1 + (m.lambda2(u1, u2) - sigma) * v2
              - db * v1 - da2 * v2)
        vd1 = p1 / a1
        vd2 = (p2 - m.beta(u1, u2) * vd1) / a2
        return (v1, v2, vd1, vd2)

    return rhs


def _phase_rhs_batch(m: ModelSpec, sigmas: np.ndarray, arcs: np.ndarray):
    """Same algebra as _phase_rhs over k stacked trajectories (one sigma each),
    with per-column time rescaled so every column traverses its own arc length
    over the unit interval.  The flat state layout is (u1[k], u2[k], v1[k],
    v2[k]); every model evaluator broadcasts, so the per-step cost is a
    handful of array ops regardless of k, and no column ever integrates past
    the arc it is read at.
    """
    sig = np.asarray(sigmas, dtype=float)
    scale = np.tile(np.asarray(arcs, dtype=float), 4)

    def rhs(_tau, y):
        k = y.size // 4
        u1, u2, v1, v2 = y[:k], y[k:2 * k], y[2 * k:3 * k], y[3 * k:]
        a1 = m.alpha1.value(u1, u2)
        a2 = m.alpha2.value(u1, u2)
        da1 = v1 * m.alpha1.d1(u1, u2) + v2 * m.alpha1.d2(u1, u2)
        da2 = v1 * m.alpha2.d1(u1, u2) + v2 * m.alpha2.d2(u1, u2)
        db1, db2 = m.beta_grad(u1, u2)
        db = v1 * db1 + v2 * db2
        p1 = (m.lambda1(u1, u2) - sig) * v1 - da1 * v1
        p2 = (m.g.d1(u1, u2) * v1 + (m.lambda2(u1, u2) - sig) * v2
              - db * v1 - da2 * v2)
        vd1 = p1 / a1
        vd2 = (p2 - m.beta(u1, u2) * vd1) / a2
        return scale * np.concatenate([v1, v2, vd1, vd2])

    return rhs


def _reduced_rhs(m: ModelSpec, sigma: float, c1: float, c2: float):
    """Right-hand side of B(U)U' = F(U) - sigma*U - c, solved for U'."""

    def rhs(_xi, y):
        u1, u2 = y
        q1 = m.f.value(u1, u2) - sigma * u1 - c1
        q2 = m.g.value(u1, u2) - sigma * u2 - c2
        up1 = q1 / m.alpha1.value(u1, u2)
        up2 = (q2 - m.beta(u1, u2) * up1) / m.alpha2.value(u1, u2)
        return (up1, up2)

    return rhs


def _box_event(m: ModelSpec):
    (lo1, hi1), (lo2, hi2) = m.validation_box

    def event(_xi, y):
        return min(y[0] - lo1, hi1 - y[0], y[1] - lo2, hi2 - y[1])

    event.terminal = True
    return event


def _classify(v: np.ndarray, u: np.ndarray, sigma: float, m: ModelSpec) -> str:
    if v[0] == 0.0 and v[1] != 0.0:
        return "two"
    if v[0] == 0.0 and v[1] == 0.0:
        d1 = abs(sigma - float(m.lambda1(u[0], u[1])))
        d2 = abs(sigma - float(m.lambda2(u[0], u[1])))
        return "one" if d1 <= d2 else "two"
    return "one"


def integrate_profile(m: ModelSpec, s0: ProfileODEState, xi_span: float,
                      tol: float = 1e-10, n_points: int = 801) -> WaveProfile:
    """Adaptive integration of the phase-space profile system over [0, xi_span].

    Stops early (reported via exited_box, not an error) if the state leaves
    the model's validation box.
    """
    if not m.in_box(float(s0.u[0]), float(s0.u[1])):
        raise ModelDomainError(f"initial state {s0.u} outside validation box")
    y0 = np.array([s0.u[0], s0.u[1], s0.v[0], s0.v[1]])
    sol = solve_ivp(_phase_rhs(m, s0.sigma), (0.0, xi_span), y0, method="RK45",
                    rtol=tol, atol=tol, dense_output=True,
                    events=_box_event(m))
    if sol.status == -1:
        raise RuntimeError(f"profile integration failed: {sol.message}")
    exited = sol.status == 1
    end = sol.t[-1]
    xs = np.linspace(0.0, end, n_points)
    ys = sol.sol(xs)
    return WaveProfile(sigma=float(s0.sigma),
                       family=_classify(s0.v, s0.u, s0.sigma, m),
                       xi=xs, u=ys[:2].T.copy(), v=ys[2:].T.copy(),
                       exited_box=exited)


def _rh_u2_plus(m: ModelSpec, u_minus, u1p: float, sigma: float) -> float:
    """Unique u2 with g(u1p, u2) - g(u_minus) = sigma*(u2 - u2m).

    d/du2 of the left side is lambda2 - sigma > 0 throughout the admissible
    band, so the root is unique and bracketable by expansion around u2m.
    """
    u1m, u2m = u_minus
    gm = float(m.g.value(u1m, u2m))

    def h(y):
        return float(m.g.value(u1p, y)) - gm - sigma * (y - u2m)

    r = 1e-3
    for _ in range(40):
        lo, hi = u2m - r, u2m + r
        if h(lo) * h(hi) < 0:
            return float(brentq(h, lo, hi, xtol=1e-14, maxiter=100))
        if h(lo) == 0.0:
            return lo
        if h(hi) == 0.0:
            return hi
        r *= 2.0
    raise RuntimeError("no Rankine-Hugoniot root for the transversal component")


def _connection_targets(m: ModelSpec, u_minus, family: str, strength: float):
    """(sigma, u_plus) with |u_plus - u_minus| = strength along the wave curve.

    The scalar jump relation fixes sigma from the u1 drop (family one) or the
    u2 drop (family two); a secant on the drop matches the euclidean distance.
    """
    u1m, u2m = u_minus
    if family == "two":
        u2p = u2m - strength
        sigma = (float(m.g.value(u1m, u2p)) - float(m.g.value(u1m, u2m))) / (u2p - u2m)
        return sigma, (u1m, u2p)

    def state_for_drop(drop):
        u1p = u1m - drop
        sigma = (float(m.f.value(u1p, 0.0)) - float(m.f.value(u1m, 0.0))) / (u1p - u1m)
        return sigma, (u1p, _rh_u2_plus(m, u_minus, u1p, sigma))

    drop = strength
    sigma, up = state_for_drop(drop)
    dist = np.hypot(up[0] - u1m, up[1] - u2m)
    prev_drop, prev_dist = drop, dist
    for _ in range(50):
        if abs(dist - strength) <= 1e-12 * max(1.0, strength):
            return sigma, up
        if dist == prev_dist and drop != prev_drop:
            break
        slope = ((dist - prev_dist) / (drop - prev_drop)
                 if drop != prev_drop else dist / drop)
        prev_drop, prev_dist = drop, dist
        drop = drop - (dist - strength) / slope
        sigma, up = state_for_drop(drop)
        dist = np.hypot(up[0] - u1m, up[1] - u2m)
    raise RuntimeError("connection shooting did not converge within 50 iterations")


def shoot_connection(m: ModelSpec, u_minus, family: str,
                     strength: float, tol: float = 1e-10,
                     n_points: int = 4001) -> WaveProfile:
    """Heteroclinic profile from u_minus to the state at the given wave-curve
    distance; the right-end residual is at most 1e-6 by construction."""
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}, got {family!r}")
    u1m, u2m = float(u_minus[0]), float(u_minus[1])
    if not m.in_box(u1m, u2m):
        raise ModelDomainError(f"left state ({u1m}, {u2m}) outside validation box")
    if strength < 0:
        raise ValueError("strength must be nonnegative (compressive side)")
    if strength == 0.0:
        lam = m.lambda1(u1m, u2m) if family == "one" else m.lambda2(u1m, u2m)
        xs = np.linspace(-1.0, 1.0, n_points)
        u = np.tile([u1m, u2m], (n_points, 1))
        return WaveProfile(sigma=float(lam), family=family, xi=xs,
                           u=u, v=np.zeros_like(u))

    sigma, (u1p, u2p) = _connection_targets(m, (u1m, u2m), family, strength)
    if not m.in_box(u1p, u2p):
        raise ModelDomainError(
            f"connected state ({u1p:.4g}, {u2p:.4g}) outside validation box; "
            "reduce strength")

    # arrival eigenvector at u_plus and slow rates at both ends
    a1p_, a2p_ = m.alpha1.value(u1p, u2p), m.alpha2.value(u1p, u2p)
    if family == "one":
        nu_plus = (m.lambda1(u1p, u2p) - sigma) / a1p_
        e2 = ((nu_plus * m.beta(u1p, u2p) - m.g.d1(u1p, u2p))
              / (m.lambda2(u1p, u2p) - sigma - nu_plus * a2p_))
        e = np.array([1.0, e2]) / np.hypot(1.0, e2)
        nu_minus = (m.lambda1(u1m, u2m) - sigma) / m.alpha1.value(u1m, u2m)
    else:
        nu_plus = (m.lambda2(u1p, u2p) - sigma) / a2p_
        e = np.array([0.0, 1.0])
        nu_minus = (m.lambda2(u1m, u2m) - sigma) / m.alpha2.value(u1m, u2m)
    if not (nu_plus < 0 < nu_minus):
        raise RuntimeError(
            f"degenerate connection rates ({nu_minus:.3g}, {nu_plus:.3g}); "
            "the requested jump is not compressive")

    delta = 1e-7
    eta_left = 1e-7
    span = 1.5 * (np.log(max(strength, 1e-3) / delta) / abs(nu_plus)
                  + np.log(max(strength, 1e-3) / eta_left) / nu_minus) + 20.0

    c1 = float(m.f.value(u1m, 0.0)) - sigma * u1m
    c2 = float(m.g.value(u1m, u2m)) - sigma * u2m
    forward = _reduced_rhs(m, sigma, c1, c2)
    backward = lambda t, y: tuple(-q for q in forward(t, y))

    u_target = np.array([u1m, u2m])

    def arrived(_t, y):
        return np.hypot(y[0] - u1m, y[1] - u2m) - eta_left

    arrived.terminal = True
    arrived.direction = -1

    y_start = np.array([u1p, u2p]) + delta * e
    sol = solve_ivp(backward, (0.0, span), y_start, method="RK45",
                    rtol=tol, atol=tol * 1e-2, dense_output=True,
                    events=arrived)
    if sol.status == -1:
        raise RuntimeError(f"profile integration failed: {sol.message}")
    if sol.status != 1:
        raise RuntimeError(
            "backward profile integration did not reach the left state; "
            f"final gap {np.hypot(*(sol.y[:, -1] - u_target)):.3e}")

    t_end = sol.t[-1]
    taus = np.linspace(0.0, t_end, n_points)
    ys = sol.sol(taus)
    xi = -taus[::-1]
    u = ys[:, ::-1].T.copy()
    v = np.array(forward(0.0, (u[:, 0], u[:, 1]))).T

    # center the profile at the interpolated mid-value crossing of the
    # jumping component, so xi = 0 marks the transition
    jump_comp = 0 if family == "one" else 1
    mid = 0.5 * (u[0, jump_comp] + u[-1, jump_comp])
    k = int(np.argmin(np.abs(u[:, jump_comp] - mid)))
    k = max(1, min(k, n_points - 2))
    y0, y1 = u[k, jump_comp], u[k + 1, jump_comp]
    frac = 0.0 if y1 == y0 else (mid - y0) / (y1 - y0)
    xi = xi - (xi[k] + frac * (xi[k + 1] - xi[k]))

    return WaveProfile(sigma=float(sigma), family=family, xi=xi, u=u, v=v)


def extract_manifold_slopes(m: ModelSpec, u1s, u2s, v1s, sigmas) -> np.ndarray:
    """Slopes s_i with (u_i, v1_i*(1, s_i), sigma_i) on the slow manifold.

    Integrates a forward arc from every sample and drives the far-end
    transversal deviation V2 - gamma(u)V1 to zero by a secant in s; the
    deviation grows like exp(mu * arc) with mu = (lambda2 - lambda1)/alpha2,
    so the secant is nearly affine and converges in two or three steps.
    The samples are independent trajectories, but stacking them into one
    adaptive solve per secant sweep shares the stepping overhead, which is
    what makes dense probes and lattice sweeps affordable.
    """
    u1s = np.atleast_1d(np.asarray(u1s, dtype=float)).copy()
    u2s = np.atleast_1d(np.asarray(u2s, dtype=float)).copy()
    v1s = np.atleast_1d(np.asarray(v1s, dtype=float)).copy()
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float)).copy()
    n = u1s.size
    (lo1, hi1), (lo2, hi2) = m.validation_box
    margin = np.minimum.reduce([u1s - lo1, hi1 - u1s, u2s - lo2, hi2 - u2s])
    if np.any(margin <= 0):
        k = int(np.argmin(margin))
        raise ModelDomainError(f"state ({u1s[k]}, {u2s[k]}) on or outside the box")
    mu = ((np.asarray(m.lambda2(u1s, u2s)) - np.asarray(m.lambda1(u1s, u2s)))
          / np.asarray(m.alpha2.value(u1s, u2s)))
    if np.any(mu <= 0):
        k = int(np.argmin(mu))
        raise ModelDomainError(
            f"wave speeds not separated at ({u1s[k]}, {u2s[k]})")
    arcs = np.minimum(
        np.minimum(8.0 / mu, margin / (2.0 * np.maximum(np.abs(v1s), 1e-9))), 80.0)

    def deviations(idx, s_vals):
        k = idx.size
        rhs = _phase_rhs_batch(m, sigmas[idx], arcs[idx])
        y0 = np.concatenate([u1s[idx], u2s[idx], v1s[idx], s_vals * v1s[idx]])
        sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853",
                        rtol=1e-12, atol=1e-14)
        if sol.status != 0:
            raise RuntimeError(f"slope arc integration failed: {sol.message}")
        z = sol.y[:, -1].reshape(4, k)
        return z[3] - np.asarray(m.gamma(z[0], z[1])) * z[2]

    result = np.asarray(m.gamma(u1s, u2s), dtype=float) + np.zeros(n)
    idx = np.arange(n)
    d_prev = deviations(idx, result)
    live = np.abs(d_prev) > 1e-14 * np.maximum(np.abs(v1s), 1e-14)
    idx = idx[live]
    if idx.size == 0:
        return result
    s_prev, d_prev = result[idx], d_prev[live]
    s_cur = s_prev + 1e-3
    d_cur = deviations(idx, s_cur)
    for _ in range(5):
        if np.any(d_cur == d_prev):
            break
        s_next = s_cur - d_cur * (s_cur - s_prev) / (d_cur - d_prev)
        done = np.abs(s_next - s_cur) <= 1e-10
        result[idx[done]] = s_next[done]
        if done.all():
            return result
        keep = ~done
        idx = idx[keep]
        s_prev, d_prev = s_cur[keep], d_cur[keep]
        s_cur = s_next[keep]
        d_cur = deviations(idx, s_cur)
    raise RuntimeError("slope extraction did not converge within 5 iterations")


def extract_manifold_slope(m: ModelSpec, u, v1: float, sigma: float) -> float:
    """Slope s with (u, v1*(1, s), sigma) on the slow manifold (single state)."""
    out = extract_manifold_slopes(m, [float(u[0])], [float(u[1])],
                                  [float(v1)], [float(sigma)])
    return float(out[0])


@dataclass(frozen=True, eq=False)
class ProbeReport:
    n_samples: int
    radius: float
    C: float
    C_sigma: float
    worst_index: int
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    sigma: np.ndarray
    psi2: np.ndarray
    bound_ratio: np.ndarray
    dpsi_dsigma: np.ndarray


def manifold_probe(m: ModelSpec, n_samples: int, radius: float = 0.05,
                   delta1: float = 0.05, seed: int = 0) -> ProbeReport:
    """Samples the neighborhood of (u*, 0, lambda1(u*)) and fits the linear
    bound |s_ode - gamma(u)| <= C |v1|, plus the same bound for the
    sigma-derivative by central differences.

    Every sample satisfies the s_eval(backend="ode") preconditions by
    construction; the slopes (base and both sigma shifts) are extracted in a
    single stacked batch, which is equivalent to per-sample s_eval calls.
    """
    if n_samples < 10:
        raise ValueError(f"n_samples must be at least 10, got {n_samples}")
    rng = np.random.default_rng(seed)
    lam_star = float(m.lambda1(*m.u_star))
    h = 0.25 * delta1

    u1s = m.u_star[0] + radius * rng.uniform(-1, 1, n_samples)
    u2s = m.u_star[1] + radius * rng.uniform(-1, 1, n_samples)
    v1s = radius * rng.uniform(-1, 1, n_samples)
    sigmas = lam_star + 1.5 * delta1 * rng.uniform(-1, 1, n_samples)

    slopes = extract_manifold_slopes(
        m, np.tile(u1s, 3), np.tile(u2s, 3), np.tile(v1s, 3),
        np.concatenate([sigmas, sigmas + h, sigmas - h]))
    gam = np.asarray(m.gamma(u1s, u2s), dtype=float)
    psi2 = slopes[:n_samples] - gam
    dpsi = (slopes[n_samples:2 * n_samples] - slopes[2 * n_samples:]) / (2 * h)
    big = np.abs(v1s) > 1e-9
    ratio = np.where(big, np.abs(psi2) / np.where(big, np.abs(v1s), 1.0), 0.0)
    sratio = np.where(big, np.abs(dpsi) / np.where(big, np.abs(v1s), 1.0), 0.0)

    worst = int(np.argmax(ratio))
    return ProbeReport(n_samples=n_samples, radius=radius,
                       C=float(ratio.max()), C_sigma=float(sratio.max()),
                       worst_index=worst, u1=u1s, u2=u2s, v1=v1s,
                       sigma=sigmas, psi2=psi2, bound_ratio=ratio,
                       dpsi_dsigma=dpsi)


def profile_flux_residual(profile: WaveProfile, m: ModelSpec) -> float:
    """Sup of the discrete residual of (B(U)U')' = (A(U) - sigma)U' on the
    profile samples (fourth-order stencil in the interior)."""
    u1, u2 = profile.u[:, 0], profile.u[:, 1]
    v1, v2 = profile.v[:, 0], profile.v[:, 1]
    flux1 = m.alpha1.value(u1, u2) * v1
    flux2 = m.beta(u1, u2) * v1 + m.alpha2.value(u1, u2) * v2
    rhs1 = (m.lambda1(u1, u2) - profile.sigma) * v1
    rhs2 = (m.g.d1(u1, u2) * v1
            + (m.lambda2(u1, u2) - profile.sigma) * v2)
    dxi = profile.xi[1] - profile.xi[0]
    worst = 0.0
    for flux, rhs in ((flux1, rhs1), (flux2, rhs2)):
        d = (flux[:-4] - 8 * flux[1:-3] + 8 * flux[3:-1] - flux[4:]) / (12 * dxi)
        worst = max(worst, float(np.max(np.abs(d - rhs[2:-2]))))
    return worst


def write_profile_csv(profile: WaveProfile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("xi,u1,u2,v1,v2\n")
        for i in range(len(profile.xi)):
            fh.write(f"{profile.xi[i]:.17g},{profile.u[i, 0]:.17g},"
                     f"{profile.u[i, 1]:.17g},{profile.v[i, 0]:.17g},"
                     f"{profile.v[i, 1]:.17g}\n")


def write_probe_csv(report: ProbeReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,u1,u2,v1,sigma,psi2,bound_ratio\n")
        for i in range(report.n_samples):
            fh.write(f"{i},{report.u1[i]:.17g},{report.u2[i]:.17g},"
                     f"{report.v1[i]:.17g},{report.sigma[i]:.17g},"
                     f"{report.psi2[i]:.17g},{report.bound_ratio[i]:.17g}\n")
