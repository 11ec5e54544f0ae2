import logging

from config.manager import NumericPolicy, active_policy

logger = logging.getLogger(__name__)

MAX_DICHOTOMIC_M = 6


def bruteforce_strategy_count(n_settings: int, n_outcomes: int) -> int:
    return (n_outcomes + 1) ** n_settings


def skip_reason(
    experiment: str,
    n: int | None = None,
    m: int | None = None,
    policy: NumericPolicy | None = None,
) -> str | None:
    """
    Returns why a row of `experiment` should be skipped, or None to run it.
    """
    policy = active_policy(policy)

    if experiment == "scaling" and n is not None:
        if n < 1:
            return f"n={n} must be >= 1"
        count = bruteforce_strategy_count(n, n + 1)
        if count > policy.bruteforce_limit:
            return f"(n+2)^n = {count} strategies exceeds limit {policy.bruteforce_limit:.0e}"

    if experiment == "dichotomic" and m is not None:
        if m < 1:
            return f"m={m} must be >= 1"
        if m > MAX_DICHOTOMIC_M:
            return f"m={m} exceeds {MAX_DICHOTOMIC_M} (2^{m} x 2^{m} operators)"
        count = 2 ** (2 * m)
        if count > policy.bruteforce_limit:
            return f"2^(2m) = {count} sign patterns exceeds limit"

    if experiment == "ppt" and n is not None and n < 2:
        return f"n={n}: PPT threshold needs local dimension >= 2"

    return None


def should_skip_row(experiment: str, **params) -> bool:
    reason = skip_reason(experiment, **params)
    if reason:
        logger.warning("%s row %s skipped: %s", experiment, params, reason)
        return True
    return False
