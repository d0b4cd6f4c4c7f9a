"""Initial-data families and the named experiment setups built from them.

Initial data comes from small parametric families (a bump with optional
plateau, smoothed Riemann data, a two-speed collision pair, a sampled
traveling-wave profile), so a configuration file describes a run entirely
by a family name, an amplitude delta0, and a handful of shape knobs.

The built-in scenarios below are nested dicts of exactly the shape the
config parser produces, which lets ``run <name>`` and ``run <file>``
share one code path.  Each scenario carries declarative checks: the name
of a metric the pipeline computes anyway, plus closed bounds on it.  The
suite summary is the union of these rows over all scenarios.

Two of the setups deserve a note on their time axes.  The plateau-bump
setup measures sup norms of second and third derivatives past a
threshold time t_hat, and when the amplitude is halved for the scaling
comparison the threshold moves like 1/amplitude^2; its re-run therefore
dilates every time in the config by ``time_dilation``.  The interaction
setup instead integrates source terms over a fixed window, so its re-run
keeps the clock unchanged (dilation 1).
"""

from __future__ import annotations

import copy

import numpy as np

from .core import Field, FieldPair, Grid1D
from .model import ModelSpec
from .travelingwave import shoot_connection

__all__ = [
    "DEFAULT_SUITE",
    "list_data_families",
    "make_initial_data",
    "perturbation_pair",
    "list_scenarios",
    "scenario_config",
]


def _edge_bump(x, amp, center, width, plateau):
    if plateau > 0.0:
        return 0.5 * amp * (np.tanh((x - center + plateau) / width)
                            - np.tanh((x - center - plateau) / width))
    return amp * np.exp(-((x - center) / width) ** 2)


def _bump(m, grid, delta0, params):
    center1 = float(params.pop("center1", -2.0))
    width1 = float(params.pop("width1", 1.5))
    plateau1 = float(params.pop("plateau1", 0.0))
    base1 = float(params.pop("base1", 0.0))
    ratio2 = float(params.pop("ratio2", 0.75))
    center2 = float(params.pop("center2", 2.0))
    width2 = float(params.pop("width2", 2.0))
    plateau2 = float(params.pop("plateau2", 0.0))
    base2 = float(params.pop("base2", 0.0))
    x = grid.centers
    u1 = base1 + _edge_bump(x, delta0, center1, width1, plateau1)
    u2 = base2 + _edge_bump(x, ratio2 * delta0, center2, width2, plateau2)
    return FieldPair(Field(grid, u1), Field(grid, u2))


def _riemann_smoothed(m, grid, delta0, params):
    width = float(params.pop("width", 0.5))
    base1 = float(params.pop("base1", 0.0))
    base2 = float(params.pop("base2", 0.0))
    ratio2 = float(params.pop("ratio2", 0.0))
    if width <= 0.0:
        raise ValueError(f"smoothing width must be positive, got {width}")
    x = grid.centers
    jump = np.tanh(x / width)
    return FieldPair(Field(grid, base1 - delta0 * jump),
                     Field(grid, base2 - ratio2 * delta0 * jump))


def _two_wave_collision(m, grid, delta0, params):
    # the slow-family hump sits ahead of the fast-family hump, which
    # overtakes it within the run window
    center1 = float(params.pop("center1", 1.0))
    width1 = float(params.pop("width1", 1.5))
    center2 = float(params.pop("center2", -5.0))
    width2 = float(params.pop("width2", 1.5))
    ratio2 = float(params.pop("ratio2", 1.0))
    x = grid.centers
    u1 = _edge_bump(x, delta0, center1, width1, 0.0)
    u2 = _edge_bump(x, ratio2 * delta0, center2, width2, 0.0)
    return FieldPair(Field(grid, u1), Field(grid, u2))


def _profile(m, grid, delta0, params):
    family = str(params.pop("wave_family", "one"))
    u_minus = params.pop("u_minus", (0.0, 0.0))
    shift = float(params.pop("shift", 0.0))
    profile = shoot_connection(m, tuple(float(c) for c in u_minus),
                               family, delta0)
    return profile.state_on_grid(grid, shift=shift)


_DATA_FAMILIES = {
    "bump": _bump,
    "riemann_smoothed": _riemann_smoothed,
    "two_wave_collision": _two_wave_collision,
    "profile": _profile,
}


def list_data_families() -> list[str]:
    return sorted(_DATA_FAMILIES)


def make_initial_data(m: ModelSpec, grid: Grid1D, family: str,
                      delta0: float, **params) -> FieldPair:
    """Initial state of the named family at amplitude delta0."""
    if family not in _DATA_FAMILIES:
        raise ValueError(
            f"unknown data family {family!r}; choose from {list_data_families()}")
    if not (delta0 > 0.0 and np.isfinite(delta0)):
        raise ValueError(f"amplitude delta0 must be positive, got {delta0}")
    leftover = dict(params)
    data = _DATA_FAMILIES[family](m, grid, float(delta0), leftover)
    if leftover:
        raise ValueError(
            f"unknown parameters for {family}: {sorted(leftover)}")
    return data


def perturbation_pair(grid: Grid1D, delta0: float) -> FieldPair:
    """Sign-changing two-component dipole used as the stability perturbation.

    A single-signed perturbation rides the conservation form with an exactly
    constant L1 norm, which would make the decay checks vacuous; the dipole
    actually exercises them.
    """
    x = grid.centers
    u1 = 0.2 * delta0 * (x - 1.0) * np.exp(-((x - 1.0)) ** 2)
    u2 = 0.15 * delta0 * (x + 1.0) * np.exp(-(((x + 1.0) / 1.3)) ** 2)
    return FieldPair(Field(grid, u1), Field(grid, u2))


def _times(start, stop, step):
    return [float(t) for t in np.round(np.arange(start, stop, step), 10)]


# fit window for the plateau-bump decay slopes; the tail past t_hat is
# where the sup-norm scaling comparison lives
_DECAY_SNAPS = ([float(t) for t in np.round(np.geomspace(0.01, 0.25, 12), 12)]
                + [0.3, 0.35, 0.4, 0.45])

_PROBE_SNAPS = ([float(t) for t in np.round(np.geomspace(0.002, 0.1, 10), 12)]
                + [float(t) for t in np.round(np.linspace(0.15, 0.6, 10), 12)])

_RIEMANN_BOX = [[-1.05, 1.05], [0.8, 1.0]]

_SCENARIOS: dict[str, dict] = {
    "decoupled_bump": {
        "model": {"family": "decoupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 1.0, "snapshots": _times(0.1, 1.0, 0.1)},
        "data": {"family": "bump", "delta0": 0.1},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "area_slack_ratio_max", "max": 0.05},
            {"metric": "length_drift_rate_max", "max": 1e-4},
            {"metric": "phi2_per_dx2_dt", "max": 0.08},
        ],
    },
    "smooth_bump": {
        "model": {"family": "coupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 1.0, "t_end": 0.5, "snapshots": _DECAY_SNAPS},
        "data": {"family": "bump", "delta0": 0.1, "halving": True,
                 "time_dilation": 4.0,
                 "center1": 0.0, "width1": 0.1, "plateau1": 4.0,
                 "center2": 1.0, "width2": 0.1, "plateau2": 4.0},
        "diagnostics": {"t_hat": 0.25, "fit_t_min": 0.01},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "decay_slope_uxx", "min": -0.65, "max": -0.35},
            {"metric": "decay_slope_uxxx", "min": -1.3, "max": -0.7},
            {"metric": "uxx_sup_factor", "min": 3.2, "max": 4.8},
            {"metric": "uxxx_sup_factor", "min": 6.0, "max": 12.0},
        ],
    },
    "coupled_interaction": {
        "model": {"family": "coupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 0.5, "snapshots": _times(0.05, 0.5, 0.05)},
        "data": {"family": "bump", "delta0": 0.1, "halving": True},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "area_slack_ratio_max", "max": 0.05},
            {"metric": "length_drift_rate_max", "max": 1e-4},
            {"metric": "phi2_halving_factor", "min": 3.2, "max": 4.8},
        ],
    },
    "two_wave_collision": {
        "model": {"family": "coupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 8.0, "snapshots": _times(0.25, 8.0, 0.25)},
        "data": {"family": "two_wave_collision", "delta0": 0.12},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "area_slack_ratio_max", "max": 0.05},
            {"metric": "transversal_slack", "min": 0.0},
        ],
    },
    "riemann_smoothed": {
        "model": {"family": "decoupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 1.0, "snapshots": _times(0.1, 1.0, 0.1)},
        "data": {"family": "riemann_smoothed", "delta0": 0.3, "width": 0.5,
                 "ratio2": 0.5},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "length_drift_rate_max", "max": 1e-4},
        ],
    },
    "epsilon_sweep": {
        "model": {"family": "decoupled_burgers", "box": _RIEMANN_BOX},
        "grid": {"x_min": -5.0, "x_max": 5.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 0.4, "snapshots": [0.1, 0.2, 0.3]},
        "data": {"family": "riemann_smoothed", "delta0": 1.0, "width": 0.01,
                 "base2": 0.9},
        "diagnostics": {"frames": False},
        "sweep": {"epsilons": [0.4, 0.2, 0.1, 0.05]},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "sweep_gap_drop_min", "min": 1e-12},
            {"metric": "sweep_gap_min_ratio", "max": 1.0},
        ],
    },
    "stability_pair": {
        "model": {"family": "coupled_burgers"},
        "grid": {"x_min": -20.0, "x_max": 20.0, "n": 1024},
        "solver": {"epsilon": 0.1, "t_end": 0.5, "snapshots": _times(0.05, 0.5, 0.05)},
        "data": {"family": "bump", "delta0": 0.05},
        "stability": {"n_theta": 3, "delta0": 0.05},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "stability_L", "max": 3.0},
            {"metric": "stability_margin_over_tol", "min": -1.0},
            {"metric": "h1_drift_rate_max", "max": 1e-6},
        ],
    },
    "time_continuity": {
        "model": {"family": "decoupled_burgers", "box": _RIEMANN_BOX},
        "grid": {"x_min": -5.0, "x_max": 5.0, "n": 1024},
        "solver": {"epsilon": 0.2, "t_end": 0.6, "snapshots": _PROBE_SNAPS},
        "data": {"family": "riemann_smoothed", "delta0": 1.0, "width": 0.01,
                 "base2": 0.9},
        "diagnostics": {"frames": False},
        "continuity": {"epsilons": [0.2, 0.05]},
        "checks": [
            {"metric": "tv_ratio_max", "max": 1.5},
            {"metric": "probe_L_max", "max": 1e3},
            {"metric": "probe_Lb_ratio", "min": 0.7, "max": 1.4},
        ],
    },
}


DEFAULT_SUITE = tuple(_SCENARIOS)


def list_scenarios() -> list[str]:
    return sorted(_SCENARIOS)


def scenario_config(name: str) -> dict:
    """Deep copy of a built-in scenario's raw configuration dict."""
    if name not in _SCENARIOS:
        raise KeyError(
            f"unknown scenario {name!r}; choose from {list_scenarios()}")
    return copy.deepcopy(_SCENARIOS[name])
