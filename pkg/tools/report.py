import argparse
import logging

from helpers.logging import MAIN_LOGGER_NAME, log_command
from helpers.report import compare_runs, load_runs
from helpers.run_manifest import RunRecorder, render_config

logger = logging.getLogger(MAIN_LOGGER_NAME)


def register_report_command(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "report",
        help="Compare finished runs side by side and plot their curves",
    )
    parser.add_argument(
        "--runs",
        nargs="+",
        required=True,
        help="Run directories, or parents whose subdirectories are runs",
    )
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--dry-run", action="store_true", help="Print the config and exit")

    @log_command
    def report(runs: list[str], out: str, dry_run: bool = False) -> str:
        """Write comparison.csv, curves.csv and SVG curve plots."""
        found = load_runs(runs)
        config = {"runs": [str(run.path) for run in found], "out": out}
        if dry_run:
            return render_config(config)

        recorder = RunRecorder("report", config)
        outputs = compare_runs(runs, out)
        recorder.finish(
            out,
            inputs=[run.path / "report.json" for run in found],
            outputs=list(outputs.values()),
        )
        return "\n".join(
            [f"Compared {len(found)} run(s): {', '.join(r.name for r in found)}"]
            + [f"  {name}: {path}" for name, path in outputs.items()]
        )

    parser.set_defaults(handler=report)
