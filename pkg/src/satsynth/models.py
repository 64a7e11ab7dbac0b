"""Count distributions used for cell synthesis: Poisson, NBI and PIG.

All three families are parameterised by a mean ``mu`` (set to the
original cell count during synthesis) and, for the two-parameter
families, a dispersion ``sigma``:

* NBI — negative binomial, a Gamma mixture of Poissons,
  ``Var = mu + sigma * mu**2``;
* PIG — Poisson-inverse Gaussian, an inverse-Gaussian mixture of
  Poissons, with the same mean/variance but heavier tails.

``sigma = 0`` is the Poisson limit and is dispatched there.  All mass
functions are evaluated in log space; the PIG pmf mixes factorially
large and exponentially small factors and would overflow otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .bessel import log_bessel_k_half, log_bessel_k_half_ladder
from .errors import ValidationError


class Family(str, enum.Enum):
    POISSON = "poisson"
    NBI = "nbi"
    PIG = "pig"

    @classmethod
    def coerce(cls, value: "Family | str") -> "Family":
        if isinstance(value, Family):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(
                f"unknown family {value!r}; expected poisson, nbi or pig"
            ) from None


@dataclass(frozen=True)
class CountModelSpec:
    """Synthesis model: family plus dispersion sigma and pseudocount alpha.

    ``sigma`` is ignored by the Poisson family; ``alpha`` is the mean
    assigned to random zeros during synthesis.
    """

    family: Family
    sigma: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family.coerce(self.family))
        if not (self.sigma >= 0.0) or not math.isfinite(self.sigma):
            raise ValidationError("sigma must be finite and >= 0")
        if not (self.alpha >= 0.0) or not math.isfinite(self.alpha):
            raise ValidationError("alpha must be finite and >= 0")

    @property
    def effective_family(self) -> Family:
        """Family actually used for evaluation; sigma=0 collapses to Poisson."""
        if self.family is not Family.POISSON and self.sigma == 0.0:
            return Family.POISSON
        return self.family


def pig_c(mu, sigma):
    """The PIG auxiliary c with c**2 = 1/sigma**2 + 2*mu/sigma (c >= 1/sigma)."""
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < 0):
        raise ValidationError("mu must be >= 0")
    if not np.all(np.asarray(sigma) > 0):
        raise ValidationError("sigma must be > 0 for the PIG auxiliary")
    return np.sqrt(1.0 / sigma**2 + 2.0 * mu / sigma)


def _validate_pmf_args(k, mu, sigma):
    k = np.asarray(k)
    if np.any(k != np.floor(k)):
        raise ValidationError("counts must be integers")
    k = k.astype(np.int64)
    if np.any(k < 0):
        raise ValidationError("counts must be >= 0")
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValidationError("mu must be finite and >= 0")
    if sigma < 0 or not math.isfinite(sigma):
        raise ValidationError("sigma must be finite and >= 0")
    return k, mu


def logpmf(family: Family | str, k, mu, sigma: float = 0.0):
    """log p(count = k | mean mu) for the given family.

    Broadcasts ``k`` against ``mu``.  ``mu = 0`` is the distribution
    degenerate at zero for every family.
    """
    family = Family.coerce(family)
    k, mu = _validate_pmf_args(k, mu, sigma)
    k_b, mu_b = np.broadcast_arrays(k, mu)
    out = np.full(k_b.shape, -np.inf, dtype=np.float64)

    zero_mean = mu_b == 0.0
    out[zero_mean & (k_b == 0)] = 0.0

    live = ~zero_mean
    if np.any(live):
        kk = k_b[live].astype(np.float64)
        mm = mu_b[live]
        if family is Family.POISSON or sigma == 0.0:
            out[live] = kk * np.log(mm) - mm - special.gammaln(kk + 1.0)
        elif family is Family.NBI:
            inv = 1.0 / sigma
            out[live] = (
                special.gammaln(kk + inv)
                - special.gammaln(kk + 1.0)
                - special.gammaln(inv)
                + kk * (np.log(sigma) + np.log(mm))
                - (kk + inv) * np.log1p(sigma * mm)
            )
        elif family is Family.PIG:
            c = np.sqrt(1.0 / sigma**2 + 2.0 * mm / sigma)
            out[live] = (
                0.5 * (np.log(2.0) + np.log(c) - np.log(np.pi))
                + kk * np.log(mm)
                + 1.0 / sigma
                + log_bessel_k_half(k_b[live], c)
                - kk * (np.log(c) + np.log(sigma))
                - special.gammaln(kk + 1.0)
            )
    if out.ndim == 0:
        return float(out)
    return out


def pmf(family: Family | str, k, mu, sigma: float = 0.0):
    """p(count = k | mean mu); exponentiated :func:`logpmf`."""
    return np.exp(logpmf(family, k, mu, sigma))


def pmf_range(family: Family | str, k_max: int, mu: float, sigma: float = 0.0) -> np.ndarray:
    """pmf over k = 0..k_max at a single (mu, sigma).

    For PIG this shares one Bessel recurrence ladder across all orders,
    making tail sums and normalization checks cheap.
    """
    family = Family.coerce(family)
    if k_max < 0:
        raise ValidationError("k_max must be >= 0")
    if mu < 0:
        raise ValidationError("mu must be >= 0")
    ks = np.arange(k_max + 1, dtype=np.int64)
    if mu == 0.0:
        out = np.zeros(k_max + 1)
        out[0] = 1.0
        return out
    if family is Family.PIG and sigma > 0.0:
        c = float(pig_c(mu, sigma))
        ladder = log_bessel_k_half_ladder(k_max, c)[:, 0]
        kk = ks.astype(np.float64)
        logs = (
            0.5 * (np.log(2.0) + np.log(c) - np.log(np.pi))
            + kk * np.log(mu)
            + 1.0 / sigma
            + ladder
            - kk * (np.log(c) + np.log(sigma))
            - special.gammaln(kk + 1.0)
        )
        return np.exp(logs)
    return pmf(family, ks, mu, sigma)


def moments(family: Family | str, mu, sigma: float = 0.0):
    """(mean, variance): mean is mu for every family; variance is mu for
    Poisson and mu + sigma*mu**2 for NBI and PIG."""
    family = Family.coerce(family)
    mu = np.asarray(mu, dtype=np.float64)
    if np.any(mu < 0):
        raise ValidationError("mu must be >= 0")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    if family is Family.POISSON or sigma == 0.0:
        var = mu.copy()
    else:
        var = mu + sigma * mu**2
    if mu.ndim == 0:
        return float(mu), float(var)
    return mu, var


def truncation_for_mass(
    family: Family | str, mu: float, sigma: float = 0.0, tail: float = 1e-9
) -> int:
    """Smallest precomputed K* with sum_{k<=K*} pmf(k) >= 1 - tail.

    Found by doubling a moment-based initial guess; intended for finite
    normalization checks and tail-sum bounds.
    """
    family = Family.coerce(family)
    if mu == 0.0:
        return 0
    _, var = moments(family, mu, sigma)
    guess = int(mu + 10.0 * math.sqrt(var) + 20.0)
    for _ in range(64):
        total = float(pmf_range(family, guess, mu, sigma).sum())
        if total >= 1.0 - tail:
            return guess
        guess *= 2
    raise ValidationError(
        f"could not reach mass 1 - {tail} (last total {total}); "
        "check parameters for validity"
    )
