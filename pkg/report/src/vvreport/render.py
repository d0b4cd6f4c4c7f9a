"""Figure rendering for run directories: four figure families plus an index.

A run directory is what the vvlab CLI leaves behind: manifest.txt next to
functionals.csv, sweep.csv and friends.  A suite root is a directory of
such run directories.  ``render_report`` accepts either, renders every
figure whose inputs exist, and collects one warning per skipped figure;
the warnings end up on the index page rather than stopping the render.

The four families:

  a. decay flatness: ||u_xx|| * sqrt(t) against t (flat when the
     square-root decay law holds), with the fitted log-log slope over
     the configured window in the caption;
  b. monotone functionals: the area and length series against time;
  c. amplitude-halving factors as bars inside their target bands;
  d. viscosity sweep gaps on log-log axes with the fitted rate.

Rendering is read-only with respect to the run directory; the output
directory must lie outside it.
"""

from __future__ import annotations

import argparse
import html
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["ScenarioReport", "ReportResult", "render_report", "main"]

# amplitude-halving factor metrics and the band each should land in
# (quadratic scalings target 4, the third-derivative scaling targets 8)
_SCALING_BANDS = {
    "phi2_halving_factor": (3.2, 4.8),
    "uxx_sup_factor": (3.2, 4.8),
    "uxxx_sup_factor": (6.0, 12.0),
}

_FIGSIZE = (6.4, 4.0)
_DPI = 110


@dataclass(frozen=True)
class ScenarioReport:
    name: str
    figures: tuple[Path, ...]
    warnings: tuple[str, ...]
    decay_slope: float | None
    sweep_slope: float | None


@dataclass(frozen=True)
class ReportResult:
    index: Path
    scenarios: tuple[ScenarioReport, ...]
    warnings: tuple[str, ...]

    @property
    def figures(self) -> list[Path]:
        return [f for s in self.scenarios for f in s.figures]


@dataclass(frozen=True)
class _Manifest:
    name: str
    echo: tuple[str, ...]
    metrics: dict
    t_hat: float
    fit_t_min: float


def _parse_manifest(path: Path) -> _Manifest:
    name, echo, metrics = path.parent.name, [], {}
    t_hat, fit_t_min = 0.25, 0.01
    section = ""
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("scenario: "):
            name = line[len("scenario: "):].strip()
        elif line in ("config:", "metrics:", "checks:"):
            section = line[:-1]
        elif line.startswith("  ") and section == "config":
            echo.append(line.strip())
            m = re.search(r"t_hat = ([^,\s]+), fit_t_min = (\S+)", line)
            if m:
                t_hat, fit_t_min = float(m.group(1)), float(m.group(2))
        elif line.startswith("  ") and section == "metrics":
            key, _, value = line.strip().partition(" = ")
            try:
                metrics[key] = float(value)
            except ValueError:
                pass
    return _Manifest(name, tuple(echo), metrics, t_hat, fit_t_min)


def _load_functionals(path: Path) -> dict:
    series: dict = {}
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        name, t, value = line.split(",")
        series.setdefault(name, []).append((float(t), float(value)))
    return {name: np.array(rows).T for name, rows in series.items()}


def _load_sweep(path: Path):
    eps, pairwise, inviscid = [], [], []
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        if line.startswith("#"):
            continue
        e, p, g = (float(c) for c in line.split(","))
        eps.append(e)
        pairwise.append(p)
        inviscid.append(g)
    return np.array(eps), np.array(pairwise), np.array(inviscid)


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def _fig_decay(out: Path, man: _Manifest, series: dict):
    """Family (a): derivative norms rescaled by their decay laws."""
    if "d2_l1" not in series:
        return None, None, "functionals.csv has no derivative-norm series; skipped decay figure"
    slope = None
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    t, d2 = series["d2_l1"]
    pos = t > 0.0
    ax.plot(t[pos], d2[pos] * np.sqrt(t[pos]), "o-", ms=3,
            label=r"$\|u_{xx}\|_{L^1}\cdot\sqrt{t}$")
    if "d3_l1" in series:
        t3, d3 = series["d3_l1"]
        pos3 = t3 > 0.0
        ax.plot(t3[pos3], d3[pos3] * t3[pos3], "s-", ms=3,
                label=r"$\|u_{xxx}\|_{L^1}\cdot t$")
    window = pos & (t >= man.fit_t_min) & (t <= man.t_hat) & (d2 > 0.0)
    if window.sum() >= 2:
        slope = float(np.polyfit(np.log(t[window]), np.log(d2[window]), 1)[0])
        ax.set_title(f"{man.name}: fitted decay slope {slope:.3f} "
                     f"on [{man.fit_t_min:g}, {man.t_hat:g}]")
    else:
        ax.set_title(f"{man.name}: too few samples to fit a decay slope")
    ax.axvline(man.t_hat, color="gray", ls="--", lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("rescaled derivative norm")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out), slope, None


def _fig_monotone(out: Path, man: _Manifest, series: dict):
    """Family (b): the area and length series, expected non-increasing."""
    present = [k for k in ("area_v1_w1", "length_v1_w1") if k in series]
    if not present:
        return None, "functionals.csv has no area or length series; skipped monotonicity figure"
    fig, axes = plt.subplots(len(present), 1, figsize=(_FIGSIZE[0], 2.4 * len(present)),
                             sharex=True, squeeze=False)
    labels = {"area_v1_w1": "area functional", "length_v1_w1": "length functional"}
    for ax, key in zip(axes[:, 0], present):
        t, v = series[key]
        ax.plot(t, v, "o-", ms=3)
        ax.set_ylabel(labels[key])
    axes[-1, 0].set_xlabel("t")
    axes[0, 0].set_title(f"{man.name}: monotone functionals")
    fig.tight_layout()
    return _save(fig, out), None


def _fig_scaling(out: Path, man: _Manifest):
    """Family (c): amplitude-halving factors inside their target bands."""
    factors = [(k, man.metrics[k]) for k in _SCALING_BANDS if k in man.metrics]
    if not factors:
        return None, "manifest has no amplitude-halving factors; skipped scaling figure"
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for i, (key, value) in enumerate(factors):
        lo, hi = _SCALING_BANDS[key]
        ax.bar([i], [value], width=0.55, color="steelblue", zorder=3)
        ax.fill_between([i - 0.4, i + 0.4], lo, hi, color="green", alpha=0.15,
                        zorder=1)
        ax.hlines([lo, hi], i - 0.4, i + 0.4, color="green", lw=1, zorder=2)
    ax.set_xticks(range(len(factors)))
    ax.set_xticklabels([k for k, _ in factors], rotation=15)
    ax.set_ylabel("halving factor")
    ax.set_title(f"{man.name}: amplitude-halving factors and target bands")
    fig.tight_layout()
    return _save(fig, out), None


def _fig_sweep(out: Path, man: _Manifest, run_dir: Path):
    """Family (d): viscosity sweep gaps on log-log axes with fitted rate."""
    path = run_dir / "sweep.csv"
    if not path.is_file():
        return None, None, "no sweep.csv; skipped viscosity sweep figure"
    eps, pairwise, inviscid = _load_sweep(path)
    slope = None
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    good = inviscid > 0.0
    ax.loglog(eps[good], inviscid[good], "o", label="gap to inviscid reference")
    paired = np.isfinite(pairwise) & (pairwise > 0.0)
    if paired.any():
        ax.loglog(eps[paired], pairwise[paired], "s", label="pairwise halving gap")
    if good.sum() >= 2:
        slope = float(np.polyfit(np.log(eps[good]), np.log(inviscid[good]), 1)[0])
        fit = np.exp(np.polyval(np.polyfit(np.log(eps[good]),
                                           np.log(inviscid[good]), 1),
                                np.log(eps[good])))
        ax.loglog(eps[good], fit, "-", color="gray",
                  label=f"fit, rate {slope:.3f}")
    ax.set_xlabel("viscosity")
    ax.set_ylabel("L1 gap")
    ax.set_title(f"{man.name}: vanishing-viscosity gaps")
    ax.legend()
    fig.tight_layout()
    return _save(fig, out), slope, None


def _render_scenario(run_dir: Path, out_dir: Path) -> ScenarioReport:
    man = _parse_manifest(run_dir / "manifest.txt")
    figures, warnings = [], []
    decay_slope = sweep_slope = None

    def keep(fig, warn):
        if fig is not None:
            figures.append(fig)
        else:
            warnings.append(warn)

    functionals = run_dir / "functionals.csv"
    if functionals.is_file():
        series = _load_functionals(functionals)
        fig, decay_slope, warn = _fig_decay(
            out_dir / f"{man.name}_decay.png", man, series)
        keep(fig, warn)
        fig, warn = _fig_monotone(
            out_dir / f"{man.name}_monotone.png", man, series)
        keep(fig, warn)
    else:
        warnings.append("no functionals.csv; skipped decay and monotonicity figures")

    fig, warn = _fig_scaling(out_dir / f"{man.name}_scaling.png", man)
    keep(fig, warn)

    fig, sweep_slope, warn = _fig_sweep(
        out_dir / f"{man.name}_sweep.png", man, run_dir)
    keep(fig, warn)

    return ScenarioReport(man.name, tuple(figures), tuple(warnings),
                          decay_slope, sweep_slope)


def _write_index(path: Path, root: Path, reports: list, warnings: list,
                 echoes: dict) -> None:
    n_figs = sum(len(r.figures) for r in reports)
    n_warn = len(warnings) + sum(len(r.warnings) for r in reports)
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>run report: {html.escape(root.name)}</title>",
        "<style>body{font-family:sans-serif;max-width:60em;margin:auto}"
        "img{max-width:100%}p.warn{color:#a40}</style>",
        "</head><body>",
        f"<h1>run report: {html.escape(str(root))}</h1>",
        f"<p>{len(reports)} scenario(s), {n_figs} figure(s), "
        f"{n_warn} warning(s).</p>",
    ]
    for warn in warnings:
        parts.append(f'<p class="warn">warning: {html.escape(warn)}</p>')
    for rep in reports:
        parts.append(f"<h2>{html.escape(rep.name)}</h2>")
        for warn in rep.warnings:
            parts.append(f'<p class="warn">warning: {html.escape(warn)}</p>')
        for fig in rep.figures:
            src = html.escape(fig.name)
            parts.append(f'<figure><img src="{src}" alt="{src}">'
                         f"<figcaption>{src}</figcaption></figure>")
        echo = echoes.get(rep.name, ())
        if echo:
            body = html.escape("\n".join(echo))
            parts.append(f"<details><summary>configuration</summary>"
                         f"<pre>{body}</pre></details>")
    parts.append("</body></html>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def render_report(run_dir, out_dir=None) -> ReportResult:
    """Render figures and index.html for a run directory or a suite root.

    Never touches run_dir contents; raises ValueError if out_dir would
    land inside it.  Missing inputs downgrade to index-page warnings.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ValueError(f"{run_dir} is not a directory")
    if out_dir is None:
        out_dir = run_dir.parent / f"{run_dir.name}_report"
    out_dir = Path(out_dir)
    if run_dir.resolve() in (out_dir.resolve(), *out_dir.resolve().parents):
        raise ValueError(
            f"output directory {out_dir} lies inside the run directory; "
            f"rendering must leave {run_dir} untouched")

    if (run_dir / "manifest.txt").is_file():
        scenario_dirs = [run_dir]
    else:
        scenario_dirs = sorted(
            d for d in run_dir.iterdir()
            if d.is_dir() and (d / "manifest.txt").is_file())

    out_dir.mkdir(parents=True, exist_ok=True)
    warnings = []
    if not scenario_dirs:
        warnings.append(f"no run directory with a manifest.txt under {run_dir}")

    reports, echoes = [], {}
    for d in scenario_dirs:
        rep = _render_scenario(d, out_dir)
        reports.append(rep)
        echoes[rep.name] = _parse_manifest(d / "manifest.txt").echo

    index = out_dir / "index.html"
    _write_index(index, run_dir, reports, warnings, echoes)
    return ReportResult(index, tuple(reports), tuple(warnings))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vvreport",
        description="Render figures and an index page from a run directory")
    parser.add_argument("run_dir", help="run directory or suite root")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        result = render_report(args.run_dir, args.out)
    except (OSError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return 2
    for rep in result.scenarios:
        for warn in rep.warnings:
            print(f"{rep.name}: {warn}", file=sys.stderr)
    for warn in result.warnings:
        print(f"warning: {warn}", file=sys.stderr)
    print(result.index)
    return 0


if __name__ == "__main__":
    sys.exit(main())
