import os

# BLAS reads these once, when numpy first loads. Entry points (main.py,
# tests/conftest.py) import this module before anything that imports numpy;
# a process that loaded numpy earlier keeps its own pool sizes.
for _blas_var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_blas_var, "1")

_DEFAULTS = {
    "threads": "1",
    "env": "local",
}

_ENV_VARS = {
    "threads": "ZACHVIT_THREADS",
    "env": "ZACHVIT_ENV",
}


def get_setting(name: str) -> str:
    """
    Get a raw setting from the environment, falling back to its default.

    Args:
        name: Setting name. Valid values: "threads", "env"

    Returns:
        The setting value as a stripped string.

    Raises:
        KeyError: If name is not a known setting.
    """
    if name not in _ENV_VARS:
        raise KeyError(
            f"Invalid setting name: {name}. "
            f"Valid values are: {', '.join(_ENV_VARS.keys())}"
        )
    value = os.getenv(_ENV_VARS[name], _DEFAULTS[name]).strip()
    return value or _DEFAULTS[name]


def get_num_threads() -> int:
    """
    Default worker count for per-exam and per-patient parallelism.

    Reads ZACHVIT_THREADS. Non-numeric or non-positive values fall back to 1.
    """
    try:
        threads = int(get_setting("threads"))
    except ValueError:
        return 1
    return threads if threads > 0 else 1
