"""Derived constants of the three-phase construction.

A :class:`ParamSet` is built in one of three ways:

* :func:`derive_parameters` from ``(n, epsilon, theta)``, the faithful route;
* :func:`params_from_target` from a merged edge probability ``p`` and a color
  budget ``kappa``, solving for the epsilon that produces ``p``;
* :func:`explicit_parameters` from raw layer probabilities ``p1, p2, p3``
  and ``kappa``, bypassing the epsilon/theta relations.  Effective epsilon
  and theta values are back-computed so the thresholds downstream remain
  defined.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from scipy.optimize import brentq

from .errors import DomainError, InfeasibleSplitError, ParameterRangeError


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def log_L_formula(eps3: float, theta3: float, theta1: float) -> float:
    """Natural log of ``max(15 exp(40/(eps3 theta3)), 7/theta1)``."""
    a = math.log(15.0) + 40.0 / (eps3 * theta3)
    b = math.log(7.0 / theta1)
    return max(a, b)


def merged_probability(p1: float, p2: float, p3: float) -> float:
    return 1.0 - (1.0 - p1) ** 2 * (1.0 - p2) ** 2 * (1.0 - p3) ** 2


@dataclass(frozen=True)
class ParamSet:
    n: int
    epsilon: float
    theta: float
    epsilon_1: float
    epsilon_2: float
    epsilon_3: float
    theta_1: float
    theta_2: float
    theta_3: float
    p_1: float
    p_2: float
    p_3: float
    kappa: int
    c_1: int
    c_2: int
    c_3: int
    gamma: float
    log_L_formula: float
    L_formula: Optional[float]
    L_effective: int
    L_overridden: bool
    p: float
    mode: str = "derived"

    @property
    def eps(self) -> tuple[float, float, float]:
        return (self.epsilon_1, self.epsilon_2, self.epsilon_3)

    @property
    def thetas(self) -> tuple[float, float, float]:
        return (self.theta_1, self.theta_2, self.theta_3)

    @property
    def probs(self) -> tuple[float, float, float]:
        return (self.p_1, self.p_2, self.p_3)

    @property
    def class_sizes(self) -> tuple[int, int, int]:
        return (self.c_1, self.c_2, self.c_3)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    def color_class(self, c: int) -> int:
        """Class index 1, 2 or 3 of color ``c``; classes are contiguous ranges."""
        if c <= self.c_1:
            return 1
        if c <= self.c_1 + self.c_2:
            return 2
        return 3

    def class_range(self, i: int) -> range:
        lo = [1, self.c_1 + 1, self.c_1 + self.c_2 + 1][i - 1]
        return range(lo, lo + self.class_sizes[i - 1])

    def to_json(self) -> dict:
        return asdict(self)


def _finish_L(n: int, eps3: float, th3: float, th1: float, l_override: Optional[int]):
    logL = log_L_formula(eps3, th3, th1)
    try:
        L_formula: Optional[float] = math.exp(logL)
    except OverflowError:
        L_formula = None
    if l_override is not None:
        if l_override < 1:
            raise DomainError("L override must be a positive integer")
        return logL, L_formula, int(l_override), L_formula is None or float(l_override) != L_formula
    cap = max(1, n // 3)
    if L_formula is None or math.ceil(L_formula) > cap:
        return logL, L_formula, cap, True
    return logL, L_formula, int(math.ceil(L_formula)), False


def _split_colors(n: int, kappa: int, th1: float, th3: float) -> tuple[int, int, int]:
    c1 = round_half_up(th1 * n)
    c3 = round_half_up(th3 * n)
    c2 = kappa - c1 - c3
    if c1 < 1 or c3 < 1 or c2 < 1:
        raise InfeasibleSplitError(f"cannot split kappa={kappa} into classes ({c1}, {c2}, {c3})")
    return c1, c2, c3


def _check_probs(ps) -> None:
    for i, p in enumerate(ps, 1):
        if not 0.0 < p < 1.0:
            raise ParameterRangeError(f"p_{i} = {p!r} is outside (0, 1)")


def derive_parameters(n: int, epsilon: float, theta: float, l_override: Optional[int] = None) -> ParamSet:
    if n < 3:
        raise DomainError("n must be at least 3")
    if epsilon <= 0 or theta <= 0:
        raise DomainError("epsilon and theta must be positive")
    e = epsilon / 3.0
    th1 = min(theta / 3.0, e / 4.0)
    th3 = th1
    th2 = theta - th1 - th3
    if th2 <= 0:
        raise InfeasibleSplitError(f"theta_2 = {th2} is not positive")
    ln = math.log(n)
    ps = (e * ln / (2 * n), (1 + e) * ln / (2 * n), e * ln / (2 * n))
    _check_probs(ps)
    kappa = round_half_up((1 + theta) * n)
    c1, c2, c3 = _split_colors(n, kappa, th1, th3)
    gamma = min(0.25, e * th1 / 4, e * th3 / 4)
    logL, L_formula, L_eff, overridden = _finish_L(n, e, th3, th1, l_override)
    return ParamSet(
        n=n, epsilon=epsilon, theta=theta,
        epsilon_1=e, epsilon_2=e, epsilon_3=e,
        theta_1=th1, theta_2=th2, theta_3=th3,
        p_1=ps[0], p_2=ps[1], p_3=ps[2],
        kappa=kappa, c_1=c1, c_2=c2, c_3=c3,
        gamma=gamma, log_L_formula=logL, L_formula=L_formula,
        L_effective=L_eff, L_overridden=overridden,
        p=merged_probability(*ps),
    )


def params_from_target(n: int, p: float, kappa: int, l_override: Optional[int] = None) -> ParamSet:
    """Parameters whose merged probability equals ``p`` and whose budget is ``kappa``.

    Epsilon is solved numerically; theta is ``kappa/n - 1``.
    """
    if not 0 < p < 1:
        raise ParameterRangeError(f"target p = {p!r} is outside (0, 1)")
    theta = kappa / n - 1.0
    if theta <= 0:
        raise InfeasibleSplitError("kappa must exceed n")
    ln = math.log(n)

    def excess(eps: float) -> float:
        e = eps / 3
        return merged_probability(e * ln / (2 * n), (1 + e) * ln / (2 * n), e * ln / (2 * n)) - p

    if excess(1e-12) >= 0:
        raise ParameterRangeError(f"target p = {p!r} is below the epsilon -> 0 limit")
    hi = 1.0
    # p_2 must stay below 1, which bounds epsilon from above
    eps_max = 3 * (2 * n / ln - 1) * (1 - 1e-12)
    while excess(hi) < 0:
        hi *= 2
        if hi >= eps_max:
            hi = eps_max
            if excess(hi) < 0:
                raise ParameterRangeError(f"target p = {p!r} is unreachable at n={n}")
            break
    eps = brentq(excess, 1e-12, hi, xtol=1e-14, rtol=1e-14)
    base = derive_parameters(n, eps, theta, l_override)
    if base.kappa != kappa:
        c1, c2, c3 = _split_colors(n, kappa, base.theta_1, base.theta_3)
        base = replace(base, kappa=kappa, c_1=c1, c_2=c2, c_3=c3)
    return replace(base, mode="target")


def explicit_parameters(
    n: int,
    p1: float,
    p2: float,
    p3: float,
    kappa: int,
    c1: Optional[int] = None,
    c3: Optional[int] = None,
    l_override: Optional[int] = None,
    allow_zero: bool = False,
) -> ParamSet:
    """Raw layer probabilities and color budget.

    Class sizes default to equal thirds of ``kappa`` when not given.  The
    reported epsilon/theta values are the effective ones implied by the
    probabilities (``eps_i = 2 n p_i / log n``, with the ``1 +`` removed for
    layer two) and by the class sizes (``theta_i = |C_i| / n``).
    ``allow_zero`` admits ``p_i = 0`` for degenerate experiments.
    """
    if n < 3:
        raise DomainError("n must be at least 3")
    ps = (p1, p2, p3)
    for i, q in enumerate(ps, 1):
        if allow_zero and q == 0.0:
            continue
        if not 0.0 < q < 1.0:
            raise ParameterRangeError(f"p_{i} = {q!r} is outside (0, 1)")
    if c1 is None:
        c1 = kappa // 3
    if c3 is None:
        c3 = kappa // 3
    c2 = kappa - c1 - c3
    if c1 < 1 or c2 < 1 or c3 < 1:
        raise InfeasibleSplitError(f"cannot split kappa={kappa} into classes ({c1}, {c2}, {c3})")
    ln = math.log(n)
    e1, e3 = 2 * n * p1 / ln, 2 * n * p3 / ln
    e2 = 2 * n * p2 / ln - 1.0
    th1, th3 = c1 / n, c3 / n
    th2 = c2 / n - 1.0
    tiny = 1e-300
    gamma = min(0.25, e1 * th1 / 4, e3 * th3 / 4)
    logL, L_formula, L_eff, overridden = _finish_L(n, max(e3, tiny), th3, th1, l_override)
    return ParamSet(
        n=n, epsilon=e1 + e2 + e3, theta=kappa / n - 1.0,
        epsilon_1=e1, epsilon_2=e2, epsilon_3=e3,
        theta_1=th1, theta_2=th2, theta_3=th3,
        p_1=p1, p_2=p2, p_3=p3,
        kappa=kappa, c_1=c1, c_2=c2, c_3=c3,
        gamma=gamma, log_L_formula=logL, L_formula=L_formula,
        L_effective=L_eff, L_overridden=overridden,
        p=merged_probability(*ps), mode="explicit",
    )


def precondition_bound(n: int) -> float:
    if n < 16:
        raise DomainError("the precondition bound needs n >= 16 so that log log n > 0")
    return 100.0 / math.sqrt(math.log(math.log(n)))


def check_theorem_preconditions(n: int, epsilon: float, theta: float) -> dict:
    bound = precondition_bound(n)
    return {"satisfied": bool(epsilon > bound and theta > bound), "bound": bound}
