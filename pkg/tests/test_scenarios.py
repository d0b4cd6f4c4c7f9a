"""Tests for the initial-data families and the built-in scenario table."""

import numpy as np
import pytest

from vvlab.core import Grid1D
from vvlab.model import build_model
from vvlab.scenarios import (
    DEFAULT_SUITE,
    list_data_families,
    list_scenarios,
    make_initial_data,
    perturbation_pair,
    scenario_config,
)
from vvlab.travelingwave import shoot_connection


@pytest.fixture(scope="module")
def m():
    return build_model("coupled_burgers")


@pytest.fixture(scope="module")
def grid():
    return Grid1D(-20.0, 20.0, 256)


class TestDataFamilies:
    def test_listing(self):
        assert list_data_families() == [
            "bump", "profile", "riemann_smoothed", "two_wave_collision"]

    def test_bump_defaults_are_gaussians(self, m, grid):
        u = make_initial_data(m, grid, "bump", 0.1)
        x = grid.centers
        want1 = 0.1 * np.exp(-((x + 2.0) / 1.5) ** 2)
        want2 = 0.075 * np.exp(-((x - 2.0) / 2.0) ** 2)
        np.testing.assert_allclose(u.u1.values, want1, rtol=0, atol=1e-15)
        np.testing.assert_allclose(u.u2.values, want2, rtol=0, atol=1e-15)

    def test_bump_plateau_is_tanh_edge_pair(self, m, grid):
        u = make_initial_data(m, grid, "bump", 0.1, center1=0.0, width1=0.1,
                              plateau1=4.0, ratio2=0.0, base2=0.05)
        x = grid.centers
        want1 = 0.05 * (np.tanh((x + 4.0) / 0.1) - np.tanh((x - 4.0) / 0.1))
        np.testing.assert_allclose(u.u1.values, want1, rtol=0, atol=1e-15)
        # ratio2 = 0 leaves the second component at its base level
        np.testing.assert_allclose(u.u2.values, 0.05, rtol=0, atol=1e-15)
        # the plateau really is flat at full amplitude in the middle
        mid = np.abs(x) < 2.0
        np.testing.assert_allclose(u.u1.values[mid], 0.1, atol=1e-8)

    def test_riemann_smoothed_closed_form(self, m, grid):
        u = make_initial_data(m, grid, "riemann_smoothed", 0.3,
                              width=0.5, base1=0.1, base2=0.9, ratio2=0.5)
        x = grid.centers
        jump = np.tanh(x / 0.5)
        np.testing.assert_allclose(u.u1.values, 0.1 - 0.3 * jump, atol=1e-15)
        np.testing.assert_allclose(u.u2.values, 0.9 - 0.15 * jump, atol=1e-15)

    def test_riemann_second_component_flat_by_default(self, m, grid):
        u = make_initial_data(m, grid, "riemann_smoothed", 0.2)
        assert np.all(u.u2.values == 0.0)

    def test_riemann_rejects_bad_width(self, m, grid):
        with pytest.raises(ValueError, match="smoothing width must be positive"):
            make_initial_data(m, grid, "riemann_smoothed", 0.2, width=0.0)

    def test_two_wave_collision_layout(self, m, grid):
        u = make_initial_data(m, grid, "two_wave_collision", 0.12)
        x = grid.centers
        want1 = 0.12 * np.exp(-((x - 1.0) / 1.5) ** 2)
        want2 = 0.12 * np.exp(-((x + 5.0) / 1.5) ** 2)
        np.testing.assert_allclose(u.u1.values, want1, atol=1e-15)
        np.testing.assert_allclose(u.u2.values, want2, atol=1e-15)
        # the slow hump starts ahead of the fast one
        assert x[np.argmax(u.u1.values)] > x[np.argmax(u.u2.values)]

    def test_profile_family_samples_the_connection(self, m, grid):
        u = make_initial_data(m, grid, "profile", 0.05,
                              wave_family="one", shift=1.0)
        want = shoot_connection(m, (0.0, 0.0), "one", 0.05).state_on_grid(
            grid, shift=1.0)
        np.testing.assert_allclose(u.u1.values, want.u1.values, atol=1e-15)
        np.testing.assert_allclose(u.u2.values, want.u2.values, atol=1e-15)

    def test_unknown_family_rejected(self, m, grid):
        with pytest.raises(ValueError, match="unknown data family 'spike'"):
            make_initial_data(m, grid, "spike", 0.1)

    @pytest.mark.parametrize("bad", [0.0, -0.1, float("nan")])
    def test_nonpositive_amplitude_rejected(self, m, grid, bad):
        with pytest.raises(ValueError, match="delta0 must be positive"):
            make_initial_data(m, grid, "bump", bad)

    @pytest.mark.parametrize("family", ["bump", "riemann_smoothed",
                                        "two_wave_collision"])
    def test_leftover_params_rejected(self, m, grid, family):
        with pytest.raises(ValueError,
                           match=rf"unknown parameters for {family}: \['zap'\]"):
            make_initial_data(m, grid, family, 0.1, zap=1.0)

    def test_kwargs_not_mutated(self, m, grid):
        params = {"center1": 0.0}
        make_initial_data(m, grid, "bump", 0.1, **params)
        assert params == {"center1": 0.0}


class TestPerturbationPair:
    def test_closed_form(self, grid):
        p = perturbation_pair(grid, 0.05)
        x = grid.centers
        want1 = 0.01 * (x - 1.0) * np.exp(-((x - 1.0)) ** 2)
        want2 = 0.0075 * (x + 1.0) * np.exp(-(((x + 1.0) / 1.3)) ** 2)
        np.testing.assert_allclose(p.u1.values, want1, atol=1e-18)
        np.testing.assert_allclose(p.u2.values, want2, atol=1e-18)

    def test_sign_changing_and_nearly_mean_free(self, grid):
        p = perturbation_pair(grid, 0.05)
        for comp in (p.u1, p.u2):
            assert comp.values.min() < 0.0 < comp.values.max()
            assert abs(np.sum(comp.values) * grid.dx) < 1e-12


class TestScenarioTable:
    def test_listing_sorted(self):
        names = list_scenarios()
        assert names == sorted(names)
        assert set(names) == set(DEFAULT_SUITE)

    def test_default_suite_order(self):
        assert DEFAULT_SUITE == (
            "decoupled_bump", "smooth_bump", "coupled_interaction",
            "two_wave_collision", "riemann_smoothed", "epsilon_sweep",
            "stability_pair", "time_continuity")

    def test_config_copies_are_isolated(self):
        cfg = scenario_config("decoupled_bump")
        cfg["data"]["delta0"] = 99.0
        cfg["checks"].clear()
        fresh = scenario_config("decoupled_bump")
        assert fresh["data"]["delta0"] == 0.1
        assert fresh["checks"]

    def test_unknown_scenario(self):
        with pytest.raises(KeyError, match="unknown scenario 'nope'"):
            scenario_config("nope")

    def test_every_scenario_has_checks(self):
        for name in DEFAULT_SUITE:
            cfg = scenario_config(name)
            assert cfg["checks"], name
            for row in cfg["checks"]:
                assert "metric" in row
                assert "min" in row or "max" in row
