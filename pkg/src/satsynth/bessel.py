"""Modified Bessel functions of the second kind at half-integer orders.

Every order needed by the Poisson-inverse-Gaussian probability mass
function is of the form ``n - 1/2`` with integer ``n``.  At these orders
K has the closed seed

    K_{1/2}(t) = K_{-1/2}(t) = sqrt(pi / (2 t)) * exp(-t)

and higher orders follow from the three-term upward recurrence

    K_{v+1}(t) = K_{v-1}(t) + (2 v / t) * K_v(t),

which is numerically stable for K because magnitudes grow with the
order.  Values span hundreds of orders of magnitude across the package's
working range, so the recurrence is carried in log space with
``logaddexp`` (every term is positive) and callers are given both the
log-scaled and the plain variant.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_LOG_SQRT_PI_OVER_2 = 0.5 * np.log(np.pi / 2.0)


def log_bessel_k_half(n, t):
    """log K_{n - 1/2}(t) for integer ``n`` (scalar or array) and t > 0.

    Parameters
    ----------
    n : int or array of int
        Order index; the Bessel order is ``n - 1/2``.  Negative indices are
        folded by the symmetry of K in its order.
    t : float or array of float
        Argument, strictly positive.

    Returns
    -------
    float or ndarray
        Natural log of K.  Broadcasts ``n`` against ``t``.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    n_arr = np.asarray(n)
    if not np.issubdtype(n_arr.dtype, np.integer):
        if np.any(n_arr != np.floor(n_arr)):
            raise ValidationError("order index must be an integer")
        n_arr = n_arr.astype(np.int64)
    if t_arr.size == 0:
        return np.zeros(np.broadcast_shapes(n_arr.shape, t_arr.shape))
    if np.any(t_arr <= 0.0):
        raise ValidationError("Bessel argument t must be positive")

    n_b, t_b = np.broadcast_arrays(n_arr, t_arr)
    m = np.where(n_b >= 1, n_b, 1 - n_b)  # canonical index >= 1
    m_max = int(m.max())

    log_seed = _LOG_SQRT_PI_OVER_2 - 0.5 * np.log(t_b) - t_b  # log K_{1/2}

    # ladder: prev = log K_{(j-1) - 1/2}, cur = log K_{j - 1/2}
    out = np.where(m == 1, log_seed, 0.0)
    prev = log_seed.copy()  # j=1 body: K_{-1/2} = K_{1/2}
    cur = log_seed.copy()
    log_t = np.log(t_b)
    for j in range(2, m_max + 1):
        nxt = np.logaddexp(prev, np.log(2.0 * j - 3.0) - log_t + cur)
        prev, cur = cur, nxt
        out = np.where(m == j, cur, out)
    if out.ndim == 0:
        return float(out)
    return out


def bessel_k_half(n, t):
    """K_{n - 1/2}(t); see :func:`log_bessel_k_half` for conventions.

    Overflows to ``inf`` when the true value exceeds float range; use the
    log variant in that regime.
    """
    return np.exp(log_bessel_k_half(n, t))


def log_bessel_k_half_ladder(n_max: int, t) -> np.ndarray:
    """log K_{n - 1/2}(t) for every n in 0..n_max at fixed argument(s).

    Returns an array with a leading axis of length ``n_max + 1``; row n is
    the order ``n - 1/2``.  One recurrence pass serves all orders, which
    is what probability-mass evaluations over a range of counts need.
    """
    if n_max < 0:
        raise ValidationError("n_max must be nonnegative")
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t_arr <= 0.0):
        raise ValidationError("Bessel argument t must be positive")
    log_seed = _LOG_SQRT_PI_OVER_2 - 0.5 * np.log(t_arr) - t_arr
    out = np.empty((n_max + 1,) + t_arr.shape, dtype=np.float64)
    out[0] = log_seed  # order -1/2 equals order 1/2
    if n_max >= 1:
        out[1] = log_seed
    log_t = np.log(t_arr)
    for j in range(2, n_max + 1):
        out[j] = np.logaddexp(out[j - 2], np.log(2.0 * j - 3.0) - log_t + out[j - 1])
    return out
