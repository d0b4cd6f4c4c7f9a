"""Scalar functionals of decomposition frames and their time integrals.

Two instantaneous quantities drive the monotonicity checks: the interface
area A (half the double integral of the wedge |z1(x)z2(y) - z1(y)z2(x)| over
x < y) and the graph length L = integral of sqrt(v1^2 + w1^2).  Both decay
along solutions, and the decay rate of A dominates the wronskian interaction
term, which is what makes the time-integrated interaction integrals finite.

All time integration uses the trapezoid rule over the snapshot times of the
run: the monotonicity statements compare adjacent snapshots, so the snapshot
cadence directly controls how sharp those comparisons are.  Cumulative series
of nonnegative integrands are non-decreasing by construction.

The energy term gates on the ratio of a flux variable to its gradient
(w1 + lam1*  v1 over v1, and likewise for a first variation).  The gate is
evaluated without ever dividing by a small denominator: wherever
|numerator| >= (4 delta1/5)|denominator| the gate saturates at 1 (this
includes denominator = 0), and only on the complement, where the ratio is
safely bounded, is the cutoff evaluated on the actual quotient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, d_dx, double_integral_wedge, integral_l1
from .decomposition import CutoffThetaHat, DecompFrame

__all__ = [
    "FunctionalSeries",
    "area_functional",
    "length_functional",
    "area_series",
    "length_series",
    "area_dissipation_series",
    "interaction_integrals",
    "phi2_series",
    "energy_term",
    "derivative_norm_series",
    "fit_loglog_slope",
    "wronskian_chain",
    "write_functionals_csv",
]

_KINDS = ("instantaneous", "cumulative")


@dataclass(frozen=True)
class FunctionalSeries:
    """Named time series of one scalar functional."""

    name: str
    samples: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        clean = tuple((float(t), float(v)) for t, v in self.samples)
        if not clean:
            raise ValueError(f"series {self.name!r} needs at least one sample")
        ts = np.array([t for t, _ in clean])
        if np.any(np.diff(ts) <= 0.0):
            raise ValueError(f"times of series {self.name!r} must be strictly increasing")
        object.__setattr__(self, "samples", clean)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples])

    @property
    def endpoint(self) -> float:
        return self.samples[-1][1]


def _cumulative(name: str, ts, rates) -> FunctionalSeries:
    ts = np.asarray(ts, dtype=float)
    rates = np.asarray(rates, dtype=float)
    steps = 0.5 * (rates[1:] + rates[:-1]) * np.diff(ts)
    vals = np.concatenate([[0.0], np.cumsum(steps)])
    return FunctionalSeries(name, tuple(zip(ts, vals)), "cumulative")


def area_functional(z1: Field, z2: Field) -> float:
    """Half the double integral over {x < y} of the wedge of two fields."""
    return double_integral_wedge(z1, z2)


def length_functional(v1: Field, w1: Field) -> float:
    """Midpoint-rule integral of sqrt(v1^2 + w1^2)."""
    if v1.grid != w1.grid:
        raise ValueError("length functional needs both fields on one grid")
    return float(np.sum(np.hypot(v1.values, w1.values)) * v1.grid.dx)


def area_series(frames: list) -> FunctionalSeries:
    return FunctionalSeries(
        "area_v1_w1",
        tuple((f.t, area_functional(f.v1, f.w1)) for f in frames),
        "instantaneous")


def length_series(frames: list) -> FunctionalSeries:
    return FunctionalSeries(
        "length_v1_w1",
        tuple((f.t, length_functional(f.v1, f.w1)) for f in frames),
        "instantaneous")


def area_dissipation_series(frames: list) -> FunctionalSeries:
    """Cumulative integral of alpha1 |v1x w1 - w1x v1|, the decay rate that
    the area functional of (v1, w1) must dominate between snapshots."""
    rates = []
    for f in frames:
        wr = f.source_terms["w1_v1_wronskian"].values
        rates.append(float(np.sum(f.alpha1_eff.values * np.abs(wr)) * f.v1.grid.dx))
    return _cumulative("area_dissipation_v1_w1", [f.t for f in frames], rates)


def _check_alignment(run, frames: list) -> None:
    if len(frames) != len(run.snapshots):
        raise ValueError(
            f"{len(frames)} frames for {len(run.snapshots)} snapshots")
    for f, (t, _) in zip(frames, run.snapshots):
        if abs(f.t - t) > 1e-12 * max(1.0, abs(t)):
            raise ValueError(f"frame at t={f.t} misaligned with snapshot t={t}")


def interaction_integrals(run, frames: list) -> list:
    """Cumulative time integrals of the interaction terms, one series each.

    Seven integrands are lifted from the per-frame source terms; the
    second-order wronskian of z1 against v1 is assembled here from the frame
    fields.  All are integrated as absolute values (the ratio-gradient term
    is already nonnegative).
    """
    _check_alignment(run, frames)
    names = ["v1_v2", "v1x_v2", "v2x_v1", "w1_v1_wronskian",
             "z1_v1_wronskian", "w1xx_v1_wronskian", "ratio_grad_sq",
             "v1x_wave_offset"]
    rates: dict = {name: [] for name in names}
    for f in frames:
        for name in names:
            if name == "z1_v1_wronskian":
                vals = (d_dx(f.z1).values * f.v1.values
                        - f.z1.values * d_dx(f.v1).values)
            else:
                vals = f.source_terms[name].values
            rates[name].append(float(np.sum(np.abs(vals)) * f.v1.grid.dx))
    ts = [f.t for f in frames]
    return [_cumulative(name, ts, rates[name]) for name in names]


def phi2_series(frames: list) -> FunctionalSeries:
    """Cumulative L1 mass of the transversal source residual.

    The residual lives on pairs of consecutive frames and is attached to the
    later one, so the series starts at the second frame time.
    """
    tail = [f for f in frames if f.phi2_residual is not None]
    if len(tail) < 2:
        raise ValueError("need at least two frames carrying the residual")
    return _cumulative("phi2_l1", [f.t for f in tail],
                       [integral_l1(f.phi2_residual) for f in tail])


def _gated_cutoff(num: np.ndarray, den: np.ndarray,
                  thetahat: CutoffThetaHat) -> np.ndarray:
    gate = np.ones_like(num)
    safe = np.abs(num) < 0.8 * thetahat.delta1 * np.abs(den)
    gate[safe] = thetahat.value(num[safe] / den[safe])
    return gate


def energy_term(frames: list, thetahat: CutoffThetaHat,
                which: str = "v") -> FunctionalSeries:
    """Cumulative integral of the gated gradient energy.

    which="v" gates on (w1 + lam1* v1)/v1 and integrates v1_x^2; which="h"
    does the same for a decomposed first variation, gating on
    (hhat1 + lam1* h1)/h1 and integrating h1_x^2.
    """
    if which not in ("v", "h"):
        raise ValueError(f"which must be 'v' or 'h', got {which!r}")
    ts, rates = [], []
    for f in frames:
        if which == "v":
            lead, companion = f.v1, f.w1
        else:
            if f.h1 is None or f.hhat1 is None:
                raise ValueError("frame carries no first variation")
            lead, companion = f.h1, f.hhat1
        num = companion.values + f.lam1_star * lead.values
        gate = _gated_cutoff(num, lead.values, thetahat)
        slope = d_dx(lead).values
        ts.append(f.t)
        rates.append(float(np.sum(gate * slope**2) * lead.grid.dx))
    return _cumulative(f"energy_{which}", ts, rates)


def derivative_norm_series(run, order: int) -> FunctionalSeries:
    """L1 norm of the order-th x-derivative, summed over components."""
    if order < 1:
        raise ValueError(f"derivative order must be at least 1, got {order}")
    ts, vals = [], []
    for t, u in run.snapshots:
        total = 0.0
        for comp in (u.u1, u.u2):
            f = comp
            for _ in range(order):
                f = d_dx(f)
            total += integral_l1(f)
        ts.append(t)
        vals.append(total)
    return FunctionalSeries(f"d{order}_l1", tuple(zip(ts, vals)), "instantaneous")


def fit_loglog_slope(series: FunctionalSeries, t_min: float,
                     t_max: float) -> float:
    """Least-squares slope of log(value) against log(t) on [t_min, t_max]."""
    pts = [(t, v) for t, v in series.samples if t_min <= t <= t_max and t > 0.0]
    if len(pts) < 2:
        raise ValueError(
            f"need at least two samples of {series.name!r} in "
            f"[{t_min}, {t_max}] to fit a slope, have {len(pts)}")
    if any(v <= 0.0 for _, v in pts):
        raise ValueError(f"series {series.name!r} is not positive on the fit window")
    ts, vs = zip(*pts)
    return float(np.polyfit(np.log(ts), np.log(vs), 1)[0])


def wronskian_chain(run, frames: list) -> dict:
    """Endpoint bookkeeping for the second-order wronskian bound.

    Pointwise the frames satisfy

        a1 (w1xx v1 - w1 v1xx)
            = (z1x v1 - z1 v1x) + (2 lam1_eff - a1' v1)(w1x v1 - v1x w1)

    up to the discrete identity residual, so after integrating in space and
    time the second-order series is controlled by the other two once a1 is
    bounded below and the advection factor is bounded above.  Returns both
    sides of that inequality together with the constants used.
    """
    series = {s.name: s for s in interaction_integrals(run, frames)}
    c1_min = min(float(f.alpha1_eff.values.min()) for f in frames)
    advection = max(
        float(np.max(np.abs(2.0 * f.lam1_eff.values
                            - f.alpha1_prime_eff.values * f.v1.values)))
        for f in frames)
    lhs = series["w1xx_v1_wronskian"].endpoint
    rhs = (series["z1_v1_wronskian"].endpoint
           + advection * series["w1_v1_wronskian"].endpoint) / c1_min
    return {"lhs": lhs, "rhs": rhs, "c1_min": c1_min,
            "advection_sup": advection}


def write_functionals_csv(series: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("name,t,value\n")
        for s in series:
            for t, v in s.samples:
                fh.write(f"{s.name},{t:.17g},{v:.17g}\n")
