"""Tool version recorded in run manifests and checkpoints."""

from importlib.metadata import PackageNotFoundError, version

try:
    TOOL_VERSION = version("zachvit-ssda")
except PackageNotFoundError:
    TOOL_VERSION = "unknown"
