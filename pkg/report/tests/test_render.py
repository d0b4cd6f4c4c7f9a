"""Tests for the renderer: synthetic run directories exercise the parsing
and figure plumbing; the acceptance test renders a real suite produced by
the vvlab CLI."""

import math

import numpy as np
import pytest

from vvreport import render_report
from vvreport.render import _parse_manifest, main

MANIFEST = """\
scenario: synth
versions: vvlab 0.1.0, python 3.10.12, numpy 2.2.6
wall_time_s: 0.100
kappa1_sup_s: 0.07
config:
  model.family = coupled_burgers
  solver.epsilon = 0.1
  diagnostics.t_hat = 0.25, fit_t_min = 0.01
metrics:
  tv_ratio_max = 1.002
  uxx_sup_factor = 4.1
  uxxx_sup_factor = 8.0
  phi2_halving_factor = 3.9
checks:
  ok   tv_ratio_max = 1.002 in [-inf, 1.5]
exit: 0
"""


def synth_scenario(dirpath, name="synth", slope=-0.5, sweep=True,
                   functionals=True):
    dirpath.mkdir(parents=True, exist_ok=True)
    (dirpath / "manifest.txt").write_text(
        MANIFEST.replace("scenario: synth", f"scenario: {name}"))
    if functionals:
        rows = ["name,t,value"]
        ts = np.geomspace(0.01, 0.4, 12)
        for t in ts:
            rows.append(f"d2_l1,{t:.17g},{0.3 * t ** slope:.17g}")
            rows.append(f"d3_l1,{t:.17g},{0.2 / t:.17g}")
        for t in np.linspace(0.0, 0.4, 9):
            rows.append(f"area_v1_w1,{t:.17g},{1e-3 * (1.0 - t):.17g}")
            rows.append(f"length_v1_w1,{t:.17g},{0.2 - 0.01 * t:.17g}")
        (dirpath / "functionals.csv").write_text("\n".join(rows) + "\n")
    if sweep:
        lines = ["eps,pairwise_gap,inviscid_gap"]
        for e in (0.4, 0.2, 0.1):
            pair = 0.2 * e if e > 0.1 else float("nan")
            lines.append(f"{e},{pair},{0.5 * e ** 0.9:.17g}")
        lines.append("# fitted_rate,0.9")
        (dirpath / "sweep.csv").write_text("\n".join(lines) + "\n")
    return dirpath


def tree_snapshot(root):
    return {p: (p.stat().st_mtime_ns, p.stat().st_size)
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestManifestParsing:
    def test_fields(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        man = _parse_manifest(run / "manifest.txt")
        assert man.name == "synth"
        assert man.t_hat == 0.25
        assert man.fit_t_min == 0.01
        assert man.metrics["uxx_sup_factor"] == 4.1
        assert "model.family = coupled_burgers" in man.echo

    def test_defaults_without_diagnostics_echo(self, tmp_path):
        text = "scenario: bare\nconfig:\n  model.family = x\nmetrics:\nexit: 0\n"
        path = tmp_path / "manifest.txt"
        path.write_text(text)
        man = _parse_manifest(path)
        assert man.name == "bare"
        assert (man.t_hat, man.fit_t_min) == (0.25, 0.01)
        assert man.metrics == {}


class TestSingleRun:
    def test_all_four_families(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        result = render_report(run, tmp_path / "figs")
        assert result.index == tmp_path / "figs" / "index.html"
        assert sorted(f.name for f in result.figures) == [
            "synth_decay.png", "synth_monotone.png",
            "synth_scaling.png", "synth_sweep.png"]
        assert all(f.stat().st_size > 0 for f in result.figures)
        (rep,) = result.scenarios
        assert rep.warnings == ()
        assert rep.decay_slope == pytest.approx(-0.5, abs=1e-12)
        assert rep.sweep_slope == pytest.approx(0.9, abs=1e-12)

    def test_index_lists_figures_and_echo(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        result = render_report(run, tmp_path / "figs")
        text = result.index.read_text()
        assert '<img src="synth_decay.png"' in text
        assert "model.family = coupled_burgers" in text
        assert "0 warning(s)" in text

    def test_missing_functionals_warns(self, tmp_path):
        run = synth_scenario(tmp_path / "run", functionals=False)
        result = render_report(run, tmp_path / "figs")
        (rep,) = result.scenarios
        assert sorted(f.name for f in rep.figures) == [
            "synth_scaling.png", "synth_sweep.png"]
        assert any("no functionals.csv" in w for w in rep.warnings)
        assert "no functionals.csv" in result.index.read_text()

    def test_missing_sweep_warns(self, tmp_path):
        run = synth_scenario(tmp_path / "run", sweep=False)
        result = render_report(run, tmp_path / "figs")
        (rep,) = result.scenarios
        assert any("no sweep.csv" in w for w in rep.warnings)

    def test_short_fit_window_renders_without_slope(self, tmp_path):
        run = tmp_path / "run"
        run.mkdir()
        (run / "manifest.txt").write_text(MANIFEST)
        (run / "functionals.csv").write_text(
            "name,t,value\nd2_l1,0.3,0.5\nd2_l1,0.4,0.4\n")
        result = render_report(run, tmp_path / "figs")
        (rep,) = result.scenarios
        assert any(f.name == "synth_decay.png" for f in rep.figures)
        assert rep.decay_slope is None


class TestSuiteRoot:
    def test_scenarios_sorted_and_prefixed(self, tmp_path):
        root = tmp_path / "suite"
        synth_scenario(root / "b_run", name="beta")
        synth_scenario(root / "a_run", name="alpha", sweep=False)
        result = render_report(root, tmp_path / "figs")
        assert [s.name for s in result.scenarios] == ["alpha", "beta"]
        names = {f.name for f in result.figures}
        assert "alpha_decay.png" in names
        assert "beta_sweep.png" in names

    def test_empty_root_yields_index_with_warning(self, tmp_path):
        root = tmp_path / "empty"
        root.mkdir()
        result = render_report(root, tmp_path / "figs")
        assert result.scenarios == ()
        assert result.figures == []
        assert any("no run directory" in w for w in result.warnings)
        assert result.index.is_file()


class TestReadOnly:
    def test_run_dir_untouched(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        before = tree_snapshot(run)
        render_report(run, tmp_path / "figs")
        assert tree_snapshot(run) == before

    def test_output_inside_run_dir_rejected(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        with pytest.raises(ValueError, match="must leave"):
            render_report(run, run / "figs")
        with pytest.raises(ValueError, match="must leave"):
            render_report(run, run)

    def test_default_output_is_a_sibling(self, tmp_path):
        run = synth_scenario(tmp_path / "run")
        result = render_report(run)
        assert result.index.parent == tmp_path / "run_report"


class TestMain:
    def test_prints_index(self, tmp_path, capsys):
        run = synth_scenario(tmp_path / "run")
        code = main([str(run), "--out", str(tmp_path / "figs")])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.strip() == str(tmp_path / "figs" / "index.html")

    def test_empty_dir_exits_zero_with_warning(self, tmp_path, capsys):
        root = tmp_path / "empty"
        root.mkdir()
        code = main([str(root), "--out", str(tmp_path / "figs")])
        captured = capsys.readouterr()
        assert code == 0
        assert "no run directory" in captured.err

    def test_bad_input_exits_two(self, tmp_path, capsys):
        code = main([str(tmp_path / "absent"), "--out", str(tmp_path / "figs")])
        assert code == 2
        assert "not a directory" in capsys.readouterr().err


@pytest.fixture(scope="session")
def default_suite(tmp_path_factory):
    cli = pytest.importorskip(
        "vvlab.cli", reason="acceptance rendering needs an installed vvlab")
    root = tmp_path_factory.mktemp("suite") / "suite_out"
    code, _ = cli.run_suite(cli.DEFAULT_SUITE, root)
    assert code == 0
    return root


def test_default_suite_renders_all_families(default_suite, tmp_path):
    result = render_report(default_suite, tmp_path / "figs")
    counts = {"decay": 0, "monotone": 0, "scaling": 0, "sweep": 0}
    for fig in result.figures:
        counts[fig.stem.rsplit("_", 1)[1]] += 1
    slopes = {s.name: s.decay_slope for s in result.scenarios}
    ok = (all(n > 0 for n in counts.values())
          and -0.65 <= slopes["smooth_bump"] <= -0.35)
    print(f"PASS suite report: figure families {counts}, smooth_bump decay "
          f"slope {slopes['smooth_bump']:.4f} in [-0.65,-0.35]"
          if ok else f"FAIL suite report: {counts}, {slopes}")
    assert ok
