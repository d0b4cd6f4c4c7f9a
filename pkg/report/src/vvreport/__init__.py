"""Figure and index-page rendering for vvlab run directories.

The package consumes only the files a run leaves behind (manifest.txt
and the CSV artifacts); it never imports the solver and never writes
into the directory it reads.
"""

from .render import ReportResult, ScenarioReport, render_report

__version__ = "0.1.0"

__all__ = ["ReportResult", "ScenarioReport", "render_report", "__version__"]
