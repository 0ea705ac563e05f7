import argparse
import logging
from pathlib import Path

from helpers.errors import VerificationFailure
from helpers.logging import MAIN_LOGGER_NAME, log_command
from helpers.manifest import write_json_atomic
from helpers.run_manifest import RunRecorder, render_config
from helpers.verify import SUITES, run_suites

logger = logging.getLogger(MAIN_LOGGER_NAME)


def register_verify_command(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "verify",
        help="Run machine-checkable property suites",
        description="Suites: " + ", ".join(SUITES) + ". Exit code 1 if any suite fails.",
    )
    parser.add_argument(
        "--suite",
        action="append",
        choices=[*SUITES, "all"],
        default=None,
        help="Suite to run; repeat for several (default: all)",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="verify-report", help="Report directory")
    parser.add_argument("--dry-run", action="store_true", help="Print the config and exit")

    @log_command
    def verify(
        suite: list[str] | None = None,
        seed: int = 0,
        out: str = "verify-report",
        dry_run: bool = False,
    ) -> str:
        """Run the suites, write verify.json, fail if any property is violated."""
        names = list(SUITES) if not suite or "all" in suite else list(dict.fromkeys(suite))
        config = {"suites": names, "seed": seed}
        if dry_run:
            return render_config(config)

        recorder = RunRecorder("verify", config)
        results = run_suites(names, seed=seed)
        out_dir = Path(out)
        write_json_atomic(
            out_dir / "verify.json", {"results": [result.to_dict() for result in results]}
        )
        recorder.finish(out_dir, outputs=[out_dir / "verify.json"])

        lines = [
            f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.message}" for r in results
        ]
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise VerificationFailure(
                "\n".join(lines) + f"\n{len(failed)} suite(s) failed: {', '.join(failed)}"
            )
        return "\n".join(lines)

    parser.set_defaults(handler=verify)
