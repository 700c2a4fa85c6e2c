import logging
from collections.abc import Callable
from typing import TypeVar

import numpy as np

from bnpl.errors import DiagnosticFailure

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_SEEDS: tuple[int, int] = (20240117, 20240521)


def _has_passed(result: object) -> bool:
    return bool(getattr(result, "passed", True))


def rerun_on_failure(
    check: Callable[[np.random.Generator], T],
    seeds: tuple[int, int] = DEFAULT_SEEDS,
    passed: Callable[[T], bool] = _has_passed,
) -> T:
    """Run a seeded statistical check, rerunning once with the second seed.

    A first attempt fails when ``passed`` says so or when the check raises
    `AssertionError` / `DiagnosticFailure`. The second attempt's outcome is
    final: its result is returned or its exception propagates.
    """
    first, second = seeds
    try:
        result = check(np.random.default_rng(first))
        if passed(result):
            return result
        reason = "did not pass"
    except (AssertionError, DiagnosticFailure) as exc:
        reason = str(exc) or type(exc).__name__
    logger.warning(
        "check failed with seed %d (%s); rerunning with %d", first, reason, second
    )
    return check(np.random.default_rng(second))
