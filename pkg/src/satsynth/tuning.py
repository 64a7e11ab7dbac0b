"""Solving for the pseudocount that hits a risk/utility target a priori.

Two targets are supported, both evaluated on the original table's size
distribution before any synthesis happens:

* match-zeros — choose alpha* so the expected proportion of (random)
  zeros in the synthetic data equals the original proportion,
  tau1(0) = tau2(0).  Closed form for all three families.
* tau4-equals — choose alpha* so the expected share of synthetic uniques
  that are true uniques equals a chosen p, tau4(1) = p.  Solved by
  bisection; tau4(1) is strictly decreasing in alpha on the bracket
  (injected uniques dilute the true ones), and the solver verifies that
  rather than assuming it.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, ValidationError
from .models import Family, pig_c
from .table import CellSizeDistribution
from .taumetrics import tau1_expected, tau4_expected


class TargetKind(str, enum.Enum):
    MATCH_ZEROS = "match-zeros"
    TAU4_EQUALS = "tau4-equals"


@dataclass(frozen=True)
class TuningTarget:
    kind: TargetKind
    sigma_star: float = 0.0
    p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.sigma_star < 0:
            raise ValidationError("sigma_star must be >= 0")
        if self.kind is TargetKind.TAU4_EQUALS:
            if self.p is None or not (0.0 < self.p <= 1.0):
                raise ValidationError("p must lie in (0, 1]")


@dataclass(frozen=True)
class TuningResult:
    family: str
    sigma: float
    target: str
    alpha_star: float
    residual: float
    iterations: int
    p: float | None = None

    def to_json(self) -> str:
        out = {
            "family": self.family,
            "sigma": self.sigma,
            "target": self.target,
            "alpha_star": self.alpha_star,
            "residual": self.residual,
            "iterations": self.iterations,
        }
        if self.p is not None:
            out["p"] = self.p
        return json.dumps(out, indent=2)


def _shrink_weight_sum(dist: CellSizeDistribution, family: Family, sigma: float) -> float:
    """(1/tau2(0)) * sum_j p(draw 0 | mean j) * tau2(j) over occupied sizes."""
    t20 = dist.proportion(0)
    if t20 <= 0.0:
        raise InfeasibleError("tau2(0) = 0: the original table has no random zeros to match")
    js = dist.nonzero_sizes.astype(np.float64)
    if js.size == 0:
        return 0.0
    ps = dist.nonzero_proportions
    if family is Family.POISSON or sigma == 0.0:
        w = np.exp(-js)
    elif family is Family.NBI:
        w = np.exp(-np.log1p(sigma * js) / sigma)
    elif family is Family.PIG:
        w = np.exp(1.0 / sigma - pig_c(js, sigma))
    else:  # pragma: no cover
        raise ValidationError(f"unhandled family {family}")
    return float(np.dot(w, ps)) / t20


def alpha_star_match_zeros(
    dist: CellSizeDistribution, family: Family | str, sigma_star: float = 0.0
) -> float:
    """Closed-form alpha* with expected tau1(0) = tau2(0).

    The shrink-to-zero mass flowing from occupied cells must be offset by
    zeros escaping to nonzero values; feasibility requires that mass to be
    smaller than the available zero proportion.
    """
    family = Family.coerce(family)
    if sigma_star < 0:
        raise ValidationError("sigma_star must be >= 0")
    s = _shrink_weight_sum(dist, family, sigma_star)
    if s >= 1.0:
        raise InfeasibleError(
            f"infeasible: shrink-to-zero mass ratio {s:.6g} >= 1; too few zeros "
            "relative to the mass collapsing onto them"
        )
    if family is Family.POISSON or sigma_star == 0.0:
        return -math.log1p(-s)
    if family is Family.NBI:
        return ((1.0 - s) ** (-sigma_star) - 1.0) / sigma_star
    # PIG: invert c_alpha = 1/sigma - log(1 - s); alpha = (c^2 - 1/sigma^2) * sigma / 2
    c_alpha = 1.0 / sigma_star - math.log1p(-s)
    return 0.5 * (sigma_star * c_alpha**2 - 1.0 / sigma_star)


def solve_alpha_for_tau4_target(
    dist: CellSizeDistribution,
    family: Family | str,
    sigma_star: float,
    p: float,
    tol: float = 1e-10,
    width_tol: float = 1e-12,
    alpha_cap: float = 1e6,
) -> TuningResult:
    """alpha* with expected tau4(1) = p, by bracketed bisection.

    Raises :class:`InfeasibleError` when p exceeds the alpha = 0 value
    (the achievable maximum) or cannot be reached inside the monotone
    region of tau4(1).
    """
    family = Family.coerce(family)
    if not (0.0 < p <= 1.0):
        raise ValidationError("p must lie in (0, 1]")
    if sigma_star < 0:
        raise ValidationError("sigma_star must be >= 0")

    def f(alpha: float) -> float:
        return tau4_expected(dist, family, sigma_star, alpha, 1, method="reduced")

    f0 = f(0.0)
    if p > f0 + 1e-12:
        raise InfeasibleError(
            f"infeasible: requested tau4(1) = {p} exceeds the achievable maximum "
            f"{f0:.10g} at alpha = 0"
        )
    if abs(f0 - p) <= tol:
        return TuningResult(family.value, sigma_star, TargetKind.TAU4_EQUALS.value, 0.0, f0 - p, 0, p)

    # bracket by doubling; tau4(1) must keep falling while above p
    lo, f_lo = 0.0, f0
    hi, f_hi = 1.0, f(1.0)
    iterations = 1
    while f_hi > p:
        if f_hi > f_lo + 1e-13:
            raise InfeasibleError(
                f"tau4(1) stopped decreasing at alpha = {lo:.6g} "
                f"(value {f_lo:.10g} < requested {p}); target not reachable "
                "in the monotone region"
            )
        if hi >= alpha_cap:
            raise InfeasibleError(
                f"no bracket below alpha = {alpha_cap:g}; smallest tau4(1) seen "
                f"is {f_hi:.10g} > requested {p}"
            )
        lo, f_lo = hi, f_hi
        hi = min(hi * 2.0, alpha_cap)
        f_hi = f(hi)
        iterations += 1

    while True:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        iterations += 1
        if abs(fm - p) < tol or (hi - lo) < width_tol:
            return TuningResult(
                family.value, sigma_star, TargetKind.TAU4_EQUALS.value, mid, fm - p, iterations, p
            )
        if fm > f_lo + 1e-12 or fm < f_hi - 1e-12:
            raise InfeasibleError(
                f"tau4(1) is not monotone on [{lo:.6g}, {hi:.6g}] "
                f"(f({mid:.6g}) = {fm:.10g} outside [{f_hi:.10g}, {f_lo:.10g}]); "
                "refusing to return a root"
            )
        if fm > p:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm


def solve(dist: CellSizeDistribution, family: Family | str, target: TuningTarget) -> TuningResult:
    """Dispatch on the target kind; returns a :class:`TuningResult`."""
    family = Family.coerce(family)
    if target.kind is TargetKind.MATCH_ZEROS:
        alpha = alpha_star_match_zeros(dist, family, target.sigma_star)
        achieved = tau1_expected(dist, family, target.sigma_star, alpha, 0)
        return TuningResult(
            family.value,
            target.sigma_star,
            TargetKind.MATCH_ZEROS.value,
            alpha,
            achieved - dist.proportion(0),
            0,
        )
    return solve_alpha_for_tau4_target(dist, family, target.sigma_star, target.p)
