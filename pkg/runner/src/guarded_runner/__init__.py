"""Guarded single-shot execution of untrusted Python programs."""

from .runner import (
    GRACE_SECONDS,
    TRUNCATION_MARKER,
    RequestError,
    RunnerRequest,
    main,
    parse_request,
    run_once,
)

__version__ = "0.1.0"

__all__ = [
    "GRACE_SECONDS",
    "TRUNCATION_MARKER",
    "RequestError",
    "RunnerRequest",
    "main",
    "parse_request",
    "run_once",
    "__version__",
]
