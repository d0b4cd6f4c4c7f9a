"""Triangular flux pair, viscosity coefficients, and the derived eigenstructure.

A model bundles the scalar flux f(u1), the coupled flux g(u1, u2) and the two
viscosity coefficients alpha1(u1), alpha2(u1, u2).  The off-diagonal viscosity
entry beta is never stored: it is always derived from the commutation
requirement

    beta(u) = (alpha1 - alpha2) * gamma(u),
    gamma(u) = dg/du1 / (f'(u1) - dg/du2),

which makes the convective matrix A(u) and the viscosity matrix B(u) share
eigenvectors, hence commute.  Standing hypotheses (eigenvalue gap, positive
bounded coefficients) are enforced by lattice sampling over a validation box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "ScalarMap2",
    "ModelSpec",
    "EigenFrame",
    "ValidationReport",
    "ModelDomainError",
    "derive_beta",
    "matrices_AB",
    "eigen_frame",
    "validate",
    "build_model",
    "list_model_families",
]


class ModelDomainError(ValueError):
    """A state left the validation box or degenerated the eigenvalue gap."""


@dataclass(frozen=True)
class ScalarMap2:
    """Smooth scalar map of the state with exact first and second partials.

    All evaluators are vectorized (numpy broadcasting).  Built-in families
    construct these from polynomial coefficient matrices, so the partial
    derivatives are exact, not finite differences.
    """

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d11: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d12: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d22: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @staticmethod
    def from_poly(coeffs) -> "ScalarMap2":
        """Build from a coefficient matrix c[i, j] for sum c_ij u1^i u2^j."""
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))

        def ev(cm):
            def f(u1, u2):
                return npoly.polyval2d(np.asarray(u1, dtype=float),
                                       np.asarray(u2, dtype=float), cm)
            return f

        c1 = npoly.polyder(c, axis=0) if c.shape[0] > 1 else np.zeros((1, 1))
        c2 = npoly.polyder(c, axis=1) if c.shape[1] > 1 else np.zeros((1, 1))
        c11 = npoly.polyder(c1, axis=0) if c1.shape[0] > 1 else np.zeros((1, 1))
        c12 = npoly.polyder(c1, axis=1) if c1.shape[1] > 1 else np.zeros((1, 1))
        c22 = npoly.polyder(c2, axis=1) if c2.shape[1] > 1 else np.zeros((1, 1))
        return ScalarMap2(ev(c), ev(c1), ev(c2), ev(c11), ev(c12), ev(c22))


@dataclass(frozen=True)
class EigenFrame:
    """Eigenstructure of A(u) (shared with B(u)) at one state."""

    lambda1: float
    lambda2: float
    gamma: float
    r1: np.ndarray
    r2: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    """The flux pair, the viscosity coefficients, and the standing hypotheses."""

    name: str
    f: ScalarMap2
    g: ScalarMap2
    alpha1: ScalarMap2
    alpha2: ScalarMap2
    u_star: tuple[float, float]
    c_hyp: float
    c1: float
    M: float
    validation_box: tuple[tuple[float, float], tuple[float, float]]
    params: dict = field(default_factory=dict)

    # -- vectorized coefficient evaluators (no domain checks; hot paths) --

    def lambda1(self, u1, u2=None):
        return self.f.d1(u1, 0.0 if u2 is None else u2)

    def lambda2(self, u1, u2):
        return self.g.d2(u1, u2)

    def gamma(self, u1, u2):
        return self.g.d1(u1, u2) / (self.f.d1(u1, u2) - self.g.d2(u1, u2))

    def beta(self, u1, u2):
        return (self.alpha1.value(u1, u2) - self.alpha2.value(u1, u2)) * self.gamma(u1, u2)

    def beta_grad(self, u1, u2):
        """Exact (d beta/du1, d beta/du2); used by the linearized viscous flux."""
        a1, a2 = self.alpha1.value(u1, u2), self.alpha2.value(u1, u2)
        g1, g2 = self.g.d1(u1, u2), self.g.d2(u1, u2)
        f1 = self.f.d1(u1, u2)
        den = f1 - g2
        gam = g1 / den
        dgam_1 = (self.g.d11(u1, u2) * den - g1 * (self.f.d11(u1, u2) - self.g.d12(u1, u2))) / den**2
        dgam_2 = (self.g.d12(u1, u2) * den + g1 * self.g.d22(u1, u2)) / den**2
        db1 = (self.alpha1.d1(u1, u2) - self.alpha2.d1(u1, u2)) * gam + (a1 - a2) * dgam_1
        db2 = (self.alpha1.d2(u1, u2) - self.alpha2.d2(u1, u2)) * gam + (a1 - a2) * dgam_2
        return db1, db2

    def in_box(self, u1, u2) -> bool:
        (lo1, hi1), (lo2, hi2) = self.validation_box
        return bool(np.all(u1 >= lo1) and np.all(u1 <= hi1)
                    and np.all(u2 >= lo2) and np.all(u2 <= hi2))

    def coefficient_sups(self, n_lattice: int = 64) -> dict:
        """Lattice suprema of the order<=2 coefficient derivatives on the box."""
        (lo1, hi1), (lo2, hi2) = self.validation_box
        U1, U2 = np.meshgrid(np.linspace(lo1, hi1, n_lattice),
                             np.linspace(lo2, hi2, n_lattice), indexing="ij")
        return {
            "sup_abs_dlambda1": float(np.max(np.abs(self.f.d11(U1, U2)))),
            "sup_abs_dalpha1": float(np.max(np.abs(self.alpha1.d1(U1, U2)))),
            "sup_abs_gamma": float(np.max(np.abs(self.gamma(U1, U2)))),
            "sup_abs_beta": float(np.max(np.abs(self.beta(U1, U2)))),
        }


def _check_state(m: ModelSpec, u1: float, u2: float) -> None:
    if not m.in_box(u1, u2):
        raise ModelDomainError(
            f"state ({u1}, {u2}) outside validation box {m.validation_box} of model {m.name}")
    gap = float(m.f.d1(u1, u2) - m.g.d2(u1, u2))
    if abs(gap) < m.c_hyp:
        raise ModelDomainError(
            f"eigenvalue gap {abs(gap):.3e} below c_hyp={m.c_hyp} at ({u1}, {u2})")


def derive_beta(m: ModelSpec, u) -> float:
    """Off-diagonal viscosity entry at a state, derived (never stored)."""
    u1, u2 = float(u[0]), float(u[1])
    _check_state(m, u1, u2)
    return float(m.beta(u1, u2))


def matrices_AB(m: ModelSpec, u) -> tuple[np.ndarray, np.ndarray]:
    """Convective matrix A = DF and viscosity matrix B at a state."""
    u1, u2 = float(u[0]), float(u[1])
    _check_state(m, u1, u2)
    A = np.array([[float(m.f.d1(u1, u2)), 0.0],
                  [float(m.g.d1(u1, u2)), float(m.g.d2(u1, u2))]])
    B = np.array([[float(m.alpha1.value(u1, u2)), 0.0],
                  [float(m.beta(u1, u2)), float(m.alpha2.value(u1, u2))]])
    return A, B


def eigen_frame(m: ModelSpec, u) -> EigenFrame:
    u1, u2 = float(u[0]), float(u[1])
    _check_state(m, u1, u2)
    gam = float(m.gamma(u1, u2))
    P = np.array([[1.0, 0.0], [-gam, 1.0]])
    P_inv = np.array([[1.0, 0.0], [gam, 1.0]])
    return EigenFrame(
        lambda1=float(m.f.d1(u1, u2)),
        lambda2=float(m.g.d2(u1, u2)),
        gamma=gam,
        r1=np.array([1.0, gam]),
        r2=np.array([0.0, 1.0]),
        P=P,
        P_inv=P_inv,
    )


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    min_gap: float
    alpha_min: float
    alpha_max: float
    max_commutator: float
    violations: tuple[str, ...]

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"validation: {status}",
            f"  min eigenvalue gap : {self.min_gap:.6g}",
            f"  alpha range        : [{self.alpha_min:.6g}, {self.alpha_max:.6g}]",
            f"  max commutator norm: {self.max_commutator:.3e}",
        ]
        lines.extend(f"  violated: {v}" for v in self.violations)
        return "\n".join(lines)


def validate(m: ModelSpec, n_lattice: int = 64) -> ValidationReport:
    """Check the standing hypotheses on an n x n lattice over the box.

    Returns a failing report (never raises) listing each violated predicate
    with a witness state.
    """
    (lo1, hi1), (lo2, hi2) = m.validation_box
    U1, U2 = np.meshgrid(np.linspace(lo1, hi1, n_lattice),
                         np.linspace(lo2, hi2, n_lattice), indexing="ij")
    gap = m.g.d2(U1, U2) - m.f.d1(U1, U2)
    a1 = np.broadcast_to(m.alpha1.value(U1, U2), U1.shape)
    a2 = np.broadcast_to(m.alpha2.value(U1, U2), U1.shape)
    violations: list[str] = []

    min_gap = float(gap.min())
    if min_gap < m.c_hyp:
        i, j = np.unravel_index(int(gap.argmin()), gap.shape)
        violations.append(
            f"eigenvalue gap {min_gap:.6g} < c_hyp={m.c_hyp} at u=({U1[i, j]:.6g}, {U2[i, j]:.6g})")

    alpha_min = float(min(a1.min(), a2.min()))
    alpha_max = float(max(a1.max(), a2.max()))
    if alpha_min < m.c1:
        k = int(np.argmin(np.minimum(a1, a2)))
        i, j = np.unravel_index(k, U1.shape)
        violations.append(
            f"viscosity coefficient {alpha_min:.6g} < c1={m.c1} at u=({U1[i, j]:.6g}, {U2[i, j]:.6g})")
    if alpha_max > m.M:
        k = int(np.argmax(np.maximum(a1, a2)))
        i, j = np.unravel_index(k, U1.shape)
        violations.append(
            f"viscosity coefficient {alpha_max:.6g} > M={m.M} at u=({U1[i, j]:.6g}, {U2[i, j]:.6g})")
    if not alpha_min > 0.0:
        violations.append(f"viscosity coefficient not positive: {alpha_min:.6g}")

    # commutator of A and B with the derived beta, on the same lattice
    lam1 = np.broadcast_to(m.f.d1(U1, U2), U1.shape)
    lam2 = m.g.d2(U1, U2)
    gu1 = m.g.d1(U1, U2)
    bet = m.beta(U1, U2)
    # the only nonzero commutator entry for triangular A, B is the lower left
    comm = gu1 * (a1 - a2) + bet * (lam2 - lam1)
    scale = 1.0 + (np.abs(lam1) + np.abs(gu1) + np.abs(lam2)) * (np.abs(a1) + np.abs(bet) + np.abs(a2))
    max_comm = float(np.max(np.abs(comm)))
    if np.max(np.abs(comm) / scale) > 1e-10:
        k = int(np.argmax(np.abs(comm) / scale))
        i, j = np.unravel_index(k, U1.shape)
        violations.append(
            f"commutator norm {max_comm:.3e} at u=({U1[i, j]:.6g}, {U2[i, j]:.6g})")

    return ValidationReport(
        passed=not violations,
        min_gap=min_gap,
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        max_commutator=max_comm,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# built-in parametric families
# ---------------------------------------------------------------------------

def _poly_u1(*coeffs: float) -> ScalarMap2:
    """Polynomial in u1 only: coeffs are (c0, c1, c2, ...)."""
    return ScalarMap2.from_poly(np.asarray(coeffs, dtype=float)[:, None])


def _decoupled_burgers(**params) -> ModelSpec:
    """Two independent scalar laws: f = u1^2/2, g = u2 + u2^2/2, unit viscosity.

    gamma = 0 identically, so the derived beta vanishes and both matrices are
    diagonal.  Baseline for every triviality check.
    """
    box = params.pop("box", ((-0.4, 0.4), (-0.4, 0.4)))
    if params:
        raise ValueError(f"unknown parameters for decoupled_burgers: {sorted(params)}")
    (lo1, hi1), (lo2, hi2) = box
    gap_inf = 1.0 + lo2 - hi1
    if gap_inf <= 0.0:
        raise ValueError(f"box {box} destroys the eigenvalue gap (inf {gap_inf:.3g})")
    return ModelSpec(
        name="decoupled_burgers",
        f=_poly_u1(0.0, 0.0, 0.5),
        g=ScalarMap2.from_poly([[0.0, 1.0, 0.5]]),
        alpha1=_poly_u1(1.0),
        alpha2=_poly_u1(1.0),
        u_star=(0.0, 0.0),
        # certified with slack; the infimum is attained at a box corner and
        # exact-boundary float rounding must not trip the hypothesis checks
        c_hyp=0.999 * gap_inf,
        c1=1.0,
        M=1.0,
        validation_box=box,
    )


def _coupled_burgers(**params) -> ModelSpec:
    """Coupled pair: f = u1^2/2, g = u2 + u2^2/2 + k u1 u2, alpha1 = 1 + q u1^2.

    The coupling k makes gamma nonzero; the u1-dependent alpha1 makes
    beta = (alpha1 - alpha2) gamma nonzero wherever u1 != 0.

    The base point u_star defaults to the origin, where gamma vanishes.  Pass
    u_star=(0.0, c) with c != 0 to expand around a state with active coupling;
    quantities that degenerate at the origin (the leading slope offset of the
    first-family direction, for one) are then bounded away from zero.
    """
    k = float(params.pop("coupling", 1.0))
    q = float(params.pop("visc_curvature", 0.25))
    box = params.pop("box", ((-0.3, 0.3), (-0.3, 0.3)))
    u_star = tuple(float(c) for c in params.pop("u_star", (0.0, 0.0)))
    if params:
        raise ValueError(f"unknown parameters for coupled_burgers: {sorted(params)}")
    (lo1, hi1), (lo2, hi2) = box
    if not (lo1 < u_star[0] < hi1 and lo2 < u_star[1] < hi2):
        raise ValueError(f"u_star {u_star} is not interior to the box {box}")
    # gap = lambda2 - lambda1 = 1 + u2 + (k - 1) u1
    gap_inf = 1.0 + lo2 + min((k - 1.0) * lo1, (k - 1.0) * hi1)
    if gap_inf <= 0.0:
        raise ValueError(f"parameters destroy the eigenvalue gap (inf {gap_inf:.3g})")
    return ModelSpec(
        name="coupled_burgers",
        f=_poly_u1(0.0, 0.0, 0.5),
        g=ScalarMap2.from_poly([[0.0, 1.0, 0.5], [0.0, k, 0.0]]),
        alpha1=_poly_u1(1.0, 0.0, q),
        alpha2=_poly_u1(1.0),
        u_star=u_star,
        c_hyp=0.999 * gap_inf,
        c1=1.0,
        M=1.001 * (1.0 + q * max(lo1**2, hi1**2)),
        validation_box=box,
        params={"coupling": k, "visc_curvature": q},
    )


def _linear_transport(**params) -> ModelSpec:
    """Constant-coefficient pair: f = a u1, g = b u2, unit viscosity.

    Both characteristic speeds are constant and the components never talk to
    each other, so the viscous solution is the heat-smoothed translate of the
    data.  Calibration baseline for the epsilon-sweep rate fit.
    """
    a = float(params.pop("speed1", 0.0))
    b = float(params.pop("speed2", 1.0))
    box = params.pop("box", ((-1.0, 1.0), (-1.0, 1.0)))
    if params:
        raise ValueError(f"unknown parameters for linear_transport: {sorted(params)}")
    gap = b - a
    if gap <= 0.0:
        raise ValueError(f"speeds ({a}, {b}) destroy the eigenvalue gap")
    return ModelSpec(
        name="linear_transport",
        f=_poly_u1(0.0, a),
        g=ScalarMap2.from_poly([[0.0, b]]),
        alpha1=_poly_u1(1.0),
        alpha2=_poly_u1(1.0),
        u_star=(0.0, 0.0),
        c_hyp=0.999 * gap,
        c1=1.0,
        M=1.0,
        validation_box=box,
        params={"speed1": a, "speed2": b},
    )


def _skew_viscous(**params) -> ModelSpec:
    """State-coupled second flux and two genuinely different viscosities.

    g has a mixed second derivative (d^2 g / du1 du2 = 1 + u1/2 here) and
    alpha1 - alpha2 stays bounded away from zero, so the derived beta and the
    wedge terms it feeds are exercised at full strength.
    """
    box = params.pop("box", ((-0.3, 0.3), (-0.3, 0.3)))
    gap_offset = float(params.pop("alpha_offset", 0.2))
    if params:
        raise ValueError(f"unknown parameters for skew_viscous: {sorted(params)}")
    (lo1, hi1), (lo2, hi2) = box
    # gap = 1 + u2 + u1^2/4 >= 1 + lo2
    gap_inf = 1.0 + lo2
    if gap_inf <= 0.0 or gap_offset <= 0.0:
        raise ValueError("parameters destroy the eigenvalue gap or the alpha offset")
    m1 = max(lo1**2, hi1**2)
    m2 = max(lo2**2, hi2**2)
    return ModelSpec(
        name="skew_viscous",
        f=_poly_u1(0.0, 0.0, 0.5),
        # g = u2 + u2^2/2 + u1 u2 + u1^2 u2 / 4
        g=ScalarMap2.from_poly([[0.0, 1.0, 0.5], [0.0, 1.0, 0.0], [0.0, 0.25, 0.0]]),
        alpha1=_poly_u1(1.0 + gap_offset, 0.0, 0.25),
        # alpha2 = 1 + u2^2/8
        alpha2=ScalarMap2.from_poly([[1.0, 0.0, 0.125]]),
        u_star=(0.0, 0.0),
        c_hyp=0.999 * gap_inf,
        c1=1.0,
        M=1.001 * max(1.0 + gap_offset + 0.25 * m1, 1.0 + 0.125 * m2),
        validation_box=box,
        params={"alpha_offset": gap_offset},
    )


_FAMILIES: dict[str, Callable[..., ModelSpec]] = {
    "decoupled_burgers": _decoupled_burgers,
    "coupled_burgers": _coupled_burgers,
    "linear_transport": _linear_transport,
    "skew_viscous": _skew_viscous,
}


def list_model_families() -> list[str]:
    return sorted(_FAMILIES)


def build_model(family: str, **params) -> ModelSpec:
    """Instantiate a built-in family by name with optional parameters."""
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise KeyError(
            f"unknown model family {family!r}; available: {', '.join(sorted(_FAMILIES))}"
        ) from None
    return builder(**params)
