# nested_covar/services/budget.py
"""
Split a total inner-simulation budget Gamma into (k, h, l, m, n).

Rounding is half-up; when the rounded nested allocation overshoots Gamma,
l is decremented first, then k, until k*h*l <= Gamma.
"""
import logging
import math
from typing import Optional, Tuple

from ..errors import InfeasibleBudget
from ..models.estimation import BudgetStrategy
from ..schemas.estimator import BudgetAllocation, BudgetConstants

logger = logging.getLogger(__name__)

MIN_GAMMA = 64
DEFAULT_STAGE2_SIZE = 250_000
DEFAULT_INNER_COUNT = 10


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def batch_shape(n: int, c: float) -> Tuple[int, int]:
    """(k, h) with sqrt(k)/h close to c: h = round((n / c^2)^(1/3)), k = floor(n / h)"""
    h = max(1, round_half_up((n / (c * c)) ** (1.0 / 3.0)))
    h = min(h, n)
    return max(1, n // h), h


def _exponents(gamma: int, **counts: int) -> dict:
    log_gamma = math.log(gamma)
    return {name: round(math.log(value) / log_gamma, 6) for name, value in counts.items()}


def _pinned_shape(constants: BudgetConstants, n: int) -> Tuple[int, int]:
    if constants.k is not None and constants.h is not None:
        return constants.k, constants.h
    if constants.h is not None:
        return max(1, n // constants.h), constants.h
    if constants.k is not None:
        return constants.k, max(1, n // constants.k)
    return batch_shape(n, constants.c)


def allocate_budget(
    gamma: int,
    strategy: BudgetStrategy,
    constants: Optional[BudgetConstants] = None,
) -> BudgetAllocation:
    """
    Resolve an allocation.

    SNS_OPT: l = round(c1 Gamma^(1/4)), h = round(c2 Gamma^(1/4)),
        k = round(Gamma^(1/2) / (c1 c2)), m = n = k h; k, h and l given
        together in constants pin the allocation instead.
    SMOOTH_FIXED_L: l fixed, n = m = Gamma // l scenarios shared by both stages.
    DECOUPLED: l fixed, m = Gamma // l stage-1 scenarios; the stage-2 size
        n is free (k*h, constants.n or 250000), raised to ceil(m^(3r)) when
        a rate exponent r is configured.

    Raises:
        InfeasibleBudget: Gamma < 64 or a pinned shape that overspends Gamma
    """
    constants = constants or BudgetConstants()
    strategy = BudgetStrategy(strategy)
    if gamma < MIN_GAMMA:
        raise InfeasibleBudget(f"budget {gamma} is below the minimum of {MIN_GAMMA}")

    if strategy is BudgetStrategy.SNS_OPT:
        if constants.k is not None and constants.h is not None and constants.l is not None:
            k, h, l = constants.k, constants.h, constants.l
        else:
            quarter = math.sqrt(math.sqrt(gamma))
            l = max(1, round_half_up(constants.c1 * quarter))
            h = max(1, round_half_up(constants.c2 * quarter))
            k = max(1, round_half_up(math.sqrt(gamma) / (constants.c1 * constants.c2)))
            while k * h * l > gamma and l > 1:
                l -= 1
            while k * h * l > gamma and k > 1:
                k -= 1
        if k * h * l > gamma:
            raise InfeasibleBudget(f"k*h*l = {k * h * l} exceeds the budget {gamma}")
        m = n = k * h

    elif strategy is BudgetStrategy.SMOOTH_FIXED_L:
        l = constants.l or DEFAULT_INNER_COUNT
        available = gamma // l
        if available < 1:
            raise InfeasibleBudget(f"budget {gamma} cannot fund one scenario with l={l}")
        k, h = _pinned_shape(constants, available)
        m = n = k * h
        if m * l > gamma:
            raise InfeasibleBudget(f"m*l = {m * l} exceeds the budget {gamma}")

    else:
        l = constants.l or DEFAULT_INNER_COUNT
        m = gamma // l
        if m < 1:
            raise InfeasibleBudget(f"budget {gamma} cannot fund one scenario with l={l}")
        if constants.k is not None and constants.h is not None:
            k, h = constants.k, constants.h
            n = k * h
        else:
            n = constants.n or DEFAULT_STAGE2_SIZE
            if constants.rate_exponent is not None:
                n = max(n, math.ceil(m ** (3.0 * constants.rate_exponent)))
            k, h = _pinned_shape(constants, n)
            n = k * h

    allocation = BudgetAllocation(
        gamma=gamma, strategy=strategy, k=k, h=h, l=l, m=m, n=n, constants=constants,
        exponents=_exponents(gamma, k=k, h=h, l=l, m=m, n=n),
    )
    logger.debug(f"Allocation {strategy.value} for gamma={gamma}: k={k}, h={h}, l={l}, m={m}, n={n}")
    return allocation
