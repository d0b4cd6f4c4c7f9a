"""Tests for the gradient decomposition: cutoffs, frames, identities, sources."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvlab.core import Field, FieldPair, Grid1D, d_dx, integral_l1
from vvlab.decomposition import (
    CutoffTheta,
    CutoffThetaHat,
    DecompFrame,
    compute_frame,
    compute_hhat,
    decompose_h,
    default_delta1,
    frames_for_run,
    identity_residual,
    phi2_residual,
    s_eval,
    source_bounds,
    with_h,
    write_frames_csv,
)
from vvlab.model import ModelDomainError, build_model
from vvlab.solver import SolverConfig, solve
from vvlab.travelingwave import extract_manifold_slopes

SOURCE_KEYS = {
    "v1x_wave_offset",
    "w1_v1_wronskian",
    "ratio_grad_sq",
    "v1_v2",
    "v1x_v2",
    "v2x_v1",
    "w1xx_v1_wronskian",
}


def bump_pair(grid, amp1=0.2, amp2=0.15, w1=1.5, w2=2.0, c2=0.5):
    x = grid.centers
    b1 = amp1 * np.exp(-((x / w1) ** 2))
    b2 = amp2 * np.exp(-(((x - c2) / w2) ** 2))
    return FieldPair(Field(grid, b1), Field(grid, b2))


def synthetic_frame(grid, v1, w1, z1, a1, a1p, lam):
    """Frame with hand-chosen diagnostic fields, for identity tests."""
    zeros = Field(grid, np.zeros(grid.n))
    const = lambda c: Field(grid, np.full(grid.n, float(c)))
    return DecompFrame(
        t=0.0, v1=Field(grid, v1), v2=zeros, w1=Field(grid, w1),
        z1=Field(grid, z1), sigma1=zeros, s=zeros, lam1_star=0.0, delta1=0.1,
        alpha1_eff=const(a1), alpha1_prime_eff=const(a1p), lam1_eff=const(lam),
        alpha2_eff=const(1.0), lam2_eff=const(1.0), source_terms={})


class TestCutoffTheta:
    def test_identity_inside_and_zero_outside(self):
        th = CutoffTheta(0.2)
        inner = np.linspace(-0.2, 0.2, 101)
        assert np.array_equal(th.value(inner), inner)
        outer = np.array([-5.0, -0.61, 0.61, 5.0])
        assert np.array_equal(th.value(outer), np.zeros(4))

    def test_odd(self):
        th = CutoffTheta(0.35)
        x = np.linspace(0, 1.4, 400)
        assert th.value(-x) == pytest.approx(-th.value(x), abs=0)

    @pytest.mark.parametrize("d1", [1e-3, 0.05, 0.2, 1.0, 7.5])
    def test_sampled_bounds(self, d1):
        th = CutoffTheta(d1)
        x = np.linspace(-3.5 * d1, 3.5 * d1, 6007)
        assert np.max(np.abs(th.value(x))) <= 2 * d1 * (1 + 1e-12)
        assert np.max(np.abs(th.deriv(x))) <= 1 + 1e-12
        assert np.max(np.abs(th.deriv2(x))) <= 16 / d1 * (1 + 1e-12)

    def test_c1_joins(self):
        # value and derivative must be continuous at every transition knot
        th = CutoffTheta(0.4)
        knots = np.array([0.4, 0.6, 1.0, 1.2])
        h = 1e-9
        for k in knots:
            for fn in (th.value, th.deriv):
                left = fn(np.array([k - h]))[0]
                right = fn(np.array([k + h]))[0]
                assert right - left == pytest.approx(0.0, abs=1e-7)

    def test_derivative_matches_finite_differences(self):
        th = CutoffTheta(0.3)
        x = np.linspace(-1.1, 1.1, 801)
        h = 1e-6
        fd = (th.value(x + h) - th.value(x - h)) / (2 * h)
        assert np.max(np.abs(fd - th.deriv(x))) < 1e-5

    @given(st.floats(min_value=1e-3, max_value=10.0, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_construction_validates_everywhere(self, d1):
        # __post_init__ samples the bounds; reaching here means they held
        th = CutoffTheta(d1)
        assert th.value(np.array([0.5 * d1]))[0] == 0.5 * d1
        assert th.value(np.array([3.0 * d1]))[0] == 0.0

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_rejects_bad_delta1(self, bad):
        with pytest.raises(ValueError):
            CutoffTheta(bad)


class TestCutoffThetaHat:
    def test_plateaus_exact(self):
        th = CutoffThetaHat(0.5)
        assert np.array_equal(th.value(np.array([0.0, 0.3, -0.3])), np.zeros(3))
        assert np.array_equal(th.value(np.array([0.4, -0.4, 2.0])), np.ones(3))

    def test_monotone_in_abs(self):
        th = CutoffThetaHat(0.25)
        x = np.linspace(0, 0.5, 1001)
        assert np.all(np.diff(th.value(x)) >= 0)

    @pytest.mark.parametrize("d1", [0.01, 0.2, 3.0])
    def test_scaled_derivative_bounds(self, d1):
        th = CutoffThetaHat(d1)
        x = np.linspace(-2 * d1, 2 * d1, 4001)
        assert d1 * np.max(np.abs(th.deriv(x))) <= 16
        assert d1**2 * np.max(np.abs(th.deriv2(x))) <= 16

    def test_range(self):
        th = CutoffThetaHat(1.0)
        v = th.value(np.linspace(-3, 3, 500))
        assert v.min() >= 0 and v.max() <= 1

    def test_rejects_bad_delta1(self):
        with pytest.raises(ValueError):
            CutoffThetaHat(-0.1)


def test_default_delta1_formula():
    m = build_model("coupled_burgers")
    # sup|f''| = 1 on the box, sup|alpha1'| = sup|0.5 u1| = 0.15
    assert default_delta1(m, 0.2) == pytest.approx(10 * 0.2 + 2 * 0.2 * 0.15)
    md = build_model("decoupled_burgers")
    assert default_delta1(md, 0.004) == 0.05  # floor engages


class TestComputeFrame:
    def test_constant_state_all_zero(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 128)
        u = FieldPair(Field(g, np.full(128, 0.1)), Field(g, np.full(128, -0.2)))
        fr = compute_frame(u, m, CutoffTheta(0.1))
        for fld in (fr.v1, fr.v2, fr.w1, fr.z1):
            assert np.array_equal(fld.values, np.zeros(128))
        assert np.array_equal(fr.sigma1.values, np.full(128, fr.lam1_star))
        for k in SOURCE_KEYS:
            assert np.array_equal(fr.source_terms[k].values, np.zeros(128))

    def test_decoupled_constant_u2_gives_zero_v2(self):
        m = build_model("decoupled_burgers")
        g = Grid1D(-6, 6, 200)
        u = FieldPair(
            Field(g, 0.2 * np.exp(-g.centers**2)), Field(g, np.full(200, 0.1)))
        fr = compute_frame(u, m, CutoffTheta(0.1))
        assert np.array_equal(fr.v2.values, np.zeros(200))

    def test_decoupled_s_is_zero_and_v2_is_du2(self):
        m = build_model("decoupled_burgers")
        g = Grid1D(-6, 6, 200)
        u = bump_pair(g, amp1=0.2, amp2=0.25)
        fr = compute_frame(u, m, CutoffTheta(0.1))
        assert np.array_equal(fr.s.values, np.zeros(200))
        assert np.array_equal(fr.v2.values, d_dx(u.u2).values)

    def test_pointwise_definitions_at_unit_viscosity(self):
        # w1 and z1 must equal the defining formulas built from model callables
        m = build_model("coupled_burgers")
        g = Grid1D(-8, 8, 256)
        u = bump_pair(g)
        fr = compute_frame(u, m, CutoffTheta(0.1))
        u1, u2 = u.u1.values, u.u2.values
        v1 = d_dx(u.u1).values
        a1 = m.alpha1.value(u1, u2)
        lam_eff = m.lambda1(u1, u2) - m.alpha1.d1(u1, u2) * v1
        w1 = a1 * d_dx(Field(g, v1)).values - lam_eff * v1
        z1 = a1 * d_dx(Field(g, w1)).values - lam_eff * w1
        assert np.array_equal(fr.v1.values, v1)
        assert fr.w1.values == pytest.approx(w1, abs=1e-15)
        assert fr.z1.values == pytest.approx(z1, abs=1e-15)

    def test_sigma1_within_cutoff_band(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-8, 8, 256)
        fr = compute_frame(bump_pair(g), m, CutoffTheta(0.05), eps=0.2)
        assert np.max(np.abs(fr.sigma1.values - fr.lam1_star)) <= 2 * 0.05

    def test_sigma1_saturates_exactly(self):
        # oscillatory u1: near its crests |w1| >> |v1|, so sigma1 = lambda1(u*)
        m = build_model("decoupled_burgers")
        g = Grid1D(-3, 3, 600)
        u = FieldPair(Field(g, 0.05 * np.cos(6 * g.centers)),
                      Field(g, np.zeros(600)))
        d1 = 0.05
        fr = compute_frame(u, m, CutoffTheta(d1))
        w1t = fr.w1_tilde.values
        saturated = np.abs(w1t) >= 3 * d1 * np.abs(fr.v1.values)
        assert saturated.any()
        assert np.array_equal(fr.sigma1.values[saturated],
                              np.full(saturated.sum(), fr.lam1_star))

    def test_w1_tilde_uses_reference_speed(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-8, 8, 128)
        fr = compute_frame(bump_pair(g), m, CutoffTheta(0.1))
        # built-in models have lambda1(u*) = 0, so w1_tilde collapses to w1
        assert fr.lam1_star == 0.0
        assert np.array_equal(fr.w1_tilde.values, fr.w1.values)

    def test_rejects_state_outside_box(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 64)
        u = FieldPair(Field(g, np.full(64, 0.5)), Field(g, np.zeros(64)))
        with pytest.raises(ModelDomainError):
            compute_frame(u, m, CutoffTheta(0.1))

    def test_rejects_unknown_backend(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 64)
        with pytest.raises(ValueError, match="backend"):
            compute_frame(bump_pair(g), m, CutoffTheta(0.1), s_backend="fit")


class TestWronskianIdentity:
    def test_constant_coefficients_exact(self):
        # with constant a1, lam the identity holds to rounding: the acceptance
        # tolerance is 1e-10 relative to the left-hand side's magnitude
        g = Grid1D(-5, 5, 512)
        x = g.centers
        v1 = np.exp(-(x**2)) * (1 + 0.3 * np.sin(2 * x))
        a1, lam = 2.3, 0.7
        w1 = a1 * d_dx(Field(g, v1)).values - lam * v1
        z1 = a1 * d_dx(Field(g, w1)).values - lam * w1
        fr = synthetic_frame(g, v1, w1, z1, a1, 0.0, lam)
        res = identity_residual(fr).values
        scale = np.max(np.abs(d_dx(fr.z1).values * v1)) + 1.0
        assert np.max(np.abs(res)) <= 1e-10 * scale

    def test_on_frame_second_order(self):
        # frozen from the oracle run: sup 1.23e-5 at n=256, refinement ratio 3.97
        m = build_model("coupled_burgers")
        sups = []
        for n in (256, 512):
            g = Grid1D(-8, 8, n)
            fr = compute_frame(bump_pair(g), m, CutoffTheta(0.1))
            sups.append(np.max(np.abs(identity_residual(fr).values)))
        assert sups[0] <= 6e-5
        assert 3.0 <= sups[0] / sups[1] <= 5.5


class TestSEval:
    def test_worked_example_gamma(self):
        m = build_model("coupled_burgers")
        s = s_eval(m, (0.1, 0.2), 0.01, 0.0, backend="gamma", eps_nbhd=0.25)
        assert s == pytest.approx(-1 / 6, rel=1e-12)

    def test_zero_v1_agrees_across_backends(self):
        m = build_model("coupled_burgers")
        a = s_eval(m, (0.02, -0.01), 0.0, 0.0, backend="gamma")
        b = s_eval(m, (0.02, -0.01), 0.0, 0.0, backend="ode")
        assert a == b

    def test_decoupled_slope_vanishes(self):
        m = build_model("decoupled_burgers")
        for u1 in (-0.03, 0.0, 0.04):
            for v1 in (-0.01, 0.0, 0.02):
                assert s_eval(m, (u1, 0.01), v1, 0.0) == 0.0

    @pytest.mark.parametrize(
        "u,v1,sigma",
        [((0.3, 0.0), 0.01, 0.0),   # state too far from u*
         ((0.01, 0.0), 0.3, 0.0),   # gradient strength too large
         ((0.01, 0.0), 0.01, 0.5)]) # speed too far from lambda1(u*)
    def test_neighborhood_violations(self, u, v1, sigma):
        m = build_model("coupled_burgers")
        with pytest.raises(ValueError, match="neighborhood"):
            s_eval(m, u, v1, sigma, eps_nbhd=0.05, delta1=0.05)

    def test_unknown_backend(self):
        m = build_model("coupled_burgers")
        with pytest.raises(ValueError, match="backend"):
            s_eval(m, (0.0, 0.0), 0.01, 0.0, backend="bogus")

    def test_ode_backend_lattice(self):
        """10x10x10 lattice of (u, v1, sigma) inside the manifold
        neighborhood: |s - gamma| <= C |v1| with a modest C throughout."""
        m = build_model("coupled_burgers", u_star=(0.0, 0.1))
        span = np.linspace(-0.8, 0.8, 10)
        u1g, v1g, sg = np.meshgrid(0.05 * span, np.linspace(-0.045, 0.045, 10),
                                   np.linspace(-0.07, 0.07, 10), indexing="ij")
        u1s = u1g.ravel()
        u2s = 0.1 + u1s  # walk u along the box diagonal
        v1s, sigs = v1g.ravel(), sg.ravel()
        slopes = extract_manifold_slopes(m, u1s, u2s, v1s, sigs)
        psi = slopes - np.asarray(m.gamma(u1s, u2s), dtype=float)
        big = np.abs(v1s) > 1e-9
        c_max = float(np.max(np.abs(psi[big]) / np.abs(v1s[big])))
        c_lsq = float(np.sum(np.abs(psi[big]) * np.abs(v1s[big]))
                      / np.sum(v1s[big] ** 2))
        assert c_max == pytest.approx(0.0918594, abs=1e-4)
        assert 0.03 <= c_lsq <= 0.12

        # the batched lattice agrees with pointwise s_eval
        rng = np.random.default_rng(7)
        for i in rng.choice(np.flatnonzero(big), 6, replace=False):
            s = s_eval(m, (u1s[i], u2s[i]), float(v1s[i]), float(sigs[i]),
                       backend="ode")
            assert abs(s - slopes[i]) <= 1e-8


@pytest.fixture(scope="module")
def decoupled_runs():
    m = build_model("decoupled_burgers")
    out = []
    for n, sp in ((400, 0.05), (800, 0.025)):
        g = Grid1D(-8, 8, n)
        x = g.centers
        u0 = FieldPair(Field(g, 0.25 * np.exp(-((x / 1.2) ** 2))),
                       Field(g, 0.2 * np.exp(-(((x - 1.0) / 1.5) ** 2))))
        snaps = tuple(np.arange(sp, 0.2 + sp / 2, sp))
        run = solve(m, u0, SolverConfig(epsilon=0.05, t_end=0.2, snapshot_times=snaps))
        out.append((m, run))
    return out


@pytest.fixture(scope="module")
def coupled_runs():
    m = build_model("coupled_burgers")
    out = []
    for n, sp in ((400, 0.05), (800, 0.025)):
        g = Grid1D(-8, 8, n)
        x = g.centers
        u0 = FieldPair(Field(g, 0.2 * np.exp(-((x / 1.2) ** 2))),
                       Field(g, 0.15 * np.exp(-(((x - 1.0) / 1.5) ** 2))))
        snaps = tuple(np.arange(sp, 0.2 + sp / 2, sp))
        run = solve(m, u0, SolverConfig(epsilon=0.1, t_end=0.2, snapshot_times=snaps))
        out.append((m, run))
    return out


def _eq_residual(fa, fb, which):
    """Midpoint residual of q_t + (lam1_eff q)_x - (a1 q_x)_x for q in {v1, w1}."""
    grid = fa.v1.grid
    dt = fb.t - fa.t
    qm = 0.5 * (getattr(fa, which).values + getattr(fb, which).values)
    lam = 0.5 * (fa.lam1_eff.values + fb.lam1_eff.values)
    a1 = 0.5 * (fa.alpha1_eff.values + fb.alpha1_eff.values)
    ddt = (getattr(fb, which).values - getattr(fa, which).values) / dt
    conv = d_dx(Field(grid, lam * qm)).values
    diff = d_dx(Field(grid, a1 * d_dx(Field(grid, qm)).values)).values
    return Field(grid, ddt + conv - diff)


class TestPhi2Residual:
    def test_decoupled_is_discretization_noise(self, decoupled_runs):
        # frozen from the oracle: 4.2e-4 at n=400, 1.0e-4 at n=800 (ratio 4.1)
        worsts = []
        for m, run in decoupled_runs:
            frames = frames_for_run(run, m, CutoffTheta(default_delta1(m, 0.25)))
            assert frames[0].phi2_residual is None
            assert all(f.phi2_residual is not None for f in frames[1:])
            worsts.append(max(integral_l1(f.phi2_residual) for f in frames[1:]))
        assert worsts[0] <= 2.1e-3
        assert worsts[0] / worsts[1] >= 2.5

    def test_frame_order_enforced(self, decoupled_runs):
        m, run = decoupled_runs[0]
        frames = frames_for_run(run, m, CutoffTheta(0.5))
        with pytest.raises(ValueError, match="order"):
            phi2_residual(frames[1], frames[0], m)

    def test_grid_mismatch_rejected(self, decoupled_runs):
        (m, run_a), (_, run_b) = decoupled_runs
        fa = frames_for_run(run_a, m, CutoffTheta(0.5))[0]
        fb = frames_for_run(run_b, m, CutoffTheta(0.5))[1]
        with pytest.raises(ValueError, match="grid"):
            phi2_residual(fa, fb, m)


class TestGradientEquations:
    def test_v1_and_w1_equations_source_free(self, coupled_runs):
        # frozen from the oracle: v1 2.5e-4, w1 7.4e-5 at n=400; ratios 3.97/3.94
        worst = {"v1": [], "w1": []}
        for m, run in coupled_runs:
            frames = frames_for_run(run, m, CutoffTheta(default_delta1(m, 0.2)))
            for which in ("v1", "w1"):
                worst[which].append(
                    max(integral_l1(_eq_residual(fa, fb, which))
                        for fa, fb in zip(frames, frames[1:])))
        assert worst["v1"][0] <= 1.3e-3
        assert worst["w1"][0] <= 3.7e-4
        assert worst["v1"][0] / worst["v1"][1] >= 2.5
        assert worst["w1"][0] / worst["w1"][1] >= 2.5


class TestSourceBounds:
    def test_keys_and_constant_state(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 64)
        u = FieldPair(Field(g, np.zeros(64)), Field(g, np.zeros(64)))
        fr = compute_frame(u, m, CutoffTheta(0.1))
        assert set(fr.source_terms) == SOURCE_KEYS
        for f in fr.source_terms.values():
            assert np.array_equal(f.values, np.zeros(64))

    def test_ratio_term_guarded_where_saturated(self):
        m = build_model("decoupled_burgers")
        g = Grid1D(-3, 3, 600)
        u = FieldPair(Field(g, 0.05 * np.cos(6 * g.centers)), Field(g, np.zeros(600)))
        d1 = 0.05
        fr = compute_frame(u, m, CutoffTheta(d1))
        dead = np.abs(fr.w1.values) > 3 * d1 * np.abs(fr.v1.values)
        assert dead.any()
        assert np.array_equal(fr.source_terms["ratio_grad_sq"].values[dead],
                              np.zeros(dead.sum()))

    def test_reflection_equivariance(self):
        # central stencils mirror exactly, so each class reflects with a fixed sign
        m = build_model("coupled_burgers")
        g = Grid1D(-8, 8, 256)
        fr = compute_frame(bump_pair(g), m, CutoffTheta(0.1), eps=0.4)
        refl = lambda fld: fld.with_values(fld.values[::-1].copy())
        fr_r = dataclasses.replace(
            fr, v1=refl(fr.v1), v2=refl(fr.v2), w1=refl(fr.w1), z1=refl(fr.z1),
            sigma1=refl(fr.sigma1), s=refl(fr.s), alpha1_eff=refl(fr.alpha1_eff),
            alpha1_prime_eff=refl(fr.alpha1_prime_eff), lam1_eff=refl(fr.lam1_eff),
            alpha2_eff=refl(fr.alpha2_eff), lam2_eff=refl(fr.lam2_eff))
        sb, sb_r = source_bounds(fr, m), source_bounds(fr_r, m)
        signs = {"v1x_wave_offset": -1, "w1_v1_wronskian": -1, "ratio_grad_sq": 1,
                 "v1_v2": 1, "v1x_v2": -1, "v2x_v1": -1, "w1xx_v1_wronskian": 1}
        for k, sgn in signs.items():
            assert np.array_equal(sb_r[k].values, sgn * sb[k].values[::-1]), k


class TestLinearizedVariables:
    def test_translation_mode_reproduces_frame(self):
        # h = u_x decomposes to exactly (v1, v2) and its companion is exactly w1
        m = build_model("coupled_burgers")
        g = Grid1D(-8, 8, 300)
        u = bump_pair(g)
        fr = compute_frame(u, m, CutoffTheta(0.1), eps=0.3)
        fr_h = with_h(fr, FieldPair(d_dx(u.u1), d_dx(u.u2)))
        assert np.array_equal(fr_h.h1.values, fr.v1.values)
        assert np.array_equal(fr_h.h2.values, fr.v2.values)
        assert np.array_equal(fr_h.hhat1.values, fr.w1.values)

    def test_zero_perturbation(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 100)
        fr = compute_frame(bump_pair(g), m, CutoffTheta(0.1))
        z = FieldPair(Field(g, np.zeros(100)), Field(g, np.zeros(100)))
        fr_h = with_h(fr, z)
        assert np.array_equal(fr_h.hhat1.values, np.zeros(100))

    def test_missing_h1_rejected(self):
        m = build_model("coupled_burgers")
        g = Grid1D(-5, 5, 100)
        fr = compute_frame(bump_pair(g), m, CutoffTheta(0.1))
        with pytest.raises(ValueError, match="h1"):
            compute_hhat(fr)

    def test_grid_mismatch_rejected(self):
        m = build_model("coupled_burgers")
        fr = compute_frame(bump_pair(Grid1D(-5, 5, 100)), m, CutoffTheta(0.1))
        other = Grid1D(-5, 5, 120)
        h = FieldPair(Field(other, np.zeros(120)), Field(other, np.zeros(120)))
        with pytest.raises(ValueError, match="grid"):
            decompose_h(fr, h)


def test_frames_csv_roundtrip(tmp_path, decoupled_runs):
    m, run = decoupled_runs[0]
    frames = frames_for_run(run, m, CutoffTheta(0.5))
    path = tmp_path / "frames.csv"
    write_frames_csv(frames, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,v1,v2,w1,z1,sigma1"
    assert len(lines) == 1 + len(frames) * run.grid.n
    first = np.array(lines[1].split(","), dtype=float)
    assert first[0] == frames[0].t
    assert first[2] == frames[0].v1.values[0]


def test_frames_csv_includes_h_columns(tmp_path):
    m = build_model("coupled_burgers")
    g = Grid1D(-5, 5, 32)
    u = bump_pair(g)
    fr = compute_frame(u, m, CutoffTheta(0.1))
    fr_h = with_h(fr, FieldPair(d_dx(u.u1), d_dx(u.u2)))
    path = tmp_path / "frames_h.csv"
    write_frames_csv([fr_h], path)
    header = path.read_text().splitlines()[0]
    assert header == "t,x,v1,v2,w1,z1,sigma1,h1,h2,hhat1"
