import argparse

from tools.augment import register_augment_command
from tools.evaluate import register_evaluate_command
from tools.report import register_report_command
from tools.synth import register_synth_command
from tools.train import register_train_command
from tools.verify import register_verify_command


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    """Register all CLI subcommands on the provided subparsers action."""
    register_synth_command(subparsers)
    register_augment_command(subparsers)
    register_train_command(subparsers)
    register_evaluate_command(subparsers)
    register_verify_command(subparsers)
    register_report_command(subparsers)
