"""Exceptions raised by the library, each mapped to a CLI exit code."""

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_CONFIG_ERROR = 3


class ZachVitError(Exception):
    """Base class for errors that the CLI reports without a traceback."""

    exit_code: int = EXIT_INPUT_ERROR


class InputError(ZachVitError):
    """Raised when input data (arrays, files, manifests) is rejected."""

    exit_code = EXIT_INPUT_ERROR


class ShapeError(InputError):
    """Raised when tensor shapes do not line up for an operation."""


class EmptyInputError(InputError):
    """Raised when an operation receives zero items to work on."""


class MissingFilesError(InputError):
    """Raised when files referenced by a manifest cannot be read."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        listing = "\n".join(f"  - {path}" for path in self.missing)
        super().__init__(
            f"{len(self.missing)} referenced path(s) are missing or unreadable:\n{listing}"
        )


class ConfigurationError(ZachVitError):
    """Raised when a configuration value is invalid or inconsistent."""

    exit_code = EXIT_CONFIG_ERROR


class GeometryError(ConfigurationError):
    """Raised when image geometry does not match the model or the patch grid."""


class ContractError(ZachVitError):
    """Raised when an API is called in a way its contract forbids."""

    exit_code = EXIT_INPUT_ERROR


class UndefinedMetricError(ZachVitError):
    """Raised when a metric is undefined for the given labels (e.g. single class)."""

    exit_code = EXIT_INPUT_ERROR


class NonFiniteError(ZachVitError):
    """Raised when a loss or gradient becomes NaN or infinite."""

    exit_code = EXIT_INPUT_ERROR


class VerificationFailure(ZachVitError):
    """Raised when a verification suite finds a property violated."""

    exit_code = EXIT_VERIFICATION_FAILED
