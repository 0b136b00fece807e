"""Bessel ratios J_nu(w) / w^nu for integer and half-integer nu >= -1/2.

The ratio is an even entire function of w, which is the form needed for the
sphere Fourier transform
    int_{S^{m-1}} exp(i w sigma_1) dsigma = (2 pi)^{m/2} J_{m/2-1}(w) / w^{m/2-1}.

Orders are passed doubled (two_nu = 2 nu) so half-integers stay exact.

  * power series for small w (all orders);
  * half-integer orders: closed trigonometric forms via upward recurrence of
    the spherical Bessel functions (stable for w > l);
  * integer orders: Hankel large-argument expansion truncated at its smallest
    term, switched in at w > INTEGER_SWITCH where it agrees with the series to
    about 1e-12.
"""

from __future__ import annotations

import math

import numpy as np

INTEGER_SWITCH = 12.0
HALF_SWITCH = 4.0
_SERIES_TERMS = 64


def _series(two_nu: int, w: np.ndarray) -> np.ndarray:
    nu = 0.5 * two_nu
    q = -0.25 * w * w
    term = np.full_like(w, 2.0**-nu / math.gamma(nu + 1.0))
    acc = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + nu))
        acc += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(acc)):
            break
    return acc


def _half_closed(l: int, w: np.ndarray) -> np.ndarray:
    # J_{l+1/2}(w) / w^{l+1/2} = sqrt(2/pi) j_l(w) / w^l
    c = math.sqrt(2.0 / math.pi)
    if l == -1:
        return c * np.cos(w)
    j_prev = np.cos(w) / w  # j_{-1}
    j_cur = np.sin(w) / w  # j_0
    for k in range(l):
        j_prev, j_cur = j_cur, (2 * k + 1) / w * j_cur - j_prev
    return c * j_cur / w**l


def _hankel_asymptotic(nu: int, w: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    P = np.ones_like(w)
    Q = np.zeros_like(w)
    a = np.ones_like(w)
    active = np.ones(w.shape, dtype=bool)
    last = np.full_like(w, np.inf)
    for k in range(1, 80):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * w)
        mag = np.abs(a)
        active &= mag < last
        if not np.any(active):
            break
        last = np.where(active, mag, last)
        contrib = np.where(active, a, 0.0)
        if k % 2:
            Q += (-1) ** ((k - 1) // 2) * contrib
        else:
            P += (-1) ** (k // 2) * contrib
        if mu == (2 * k - 1) ** 2:
            break
    chi = w - (0.5 * nu + 0.25) * math.pi
    J = np.sqrt(2.0 / (math.pi * w)) * (P * np.cos(chi) - Q * np.sin(chi))
    return J / w**nu


def bessel_ratio(two_nu: int, w) -> np.ndarray:
    """J_nu(w) / w^nu with nu = two_nu / 2, for w >= 0 (even in w)."""
    two_nu = int(two_nu)
    if two_nu < -1:
        raise ValueError("order must satisfy nu >= -1/2")
    w = np.abs(np.asarray(w, dtype=float))
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.empty_like(w)
    if two_nu % 2:
        l = (two_nu - 1) // 2
        if l <= 0:
            small = w < 1e-8 if l == 0 else np.zeros(w.shape, dtype=bool)
        else:
            small = w < max(HALF_SWITCH, 2.0 * l)
        big = ~small
        if np.any(big):
            out[big] = _half_closed(l, w[big])
        if np.any(small):
            out[small] = _series(two_nu, w[small])
    else:
        nu = two_nu // 2
        small = w <= INTEGER_SWITCH
        if np.any(small):
            out[small] = _series(two_nu, w[small])
        if np.any(~small):
            out[~small] = _hankel_asymptotic(nu, w[~small])
    return out[0] if scalar else out


def sphere_ft(m: int, w) -> np.ndarray:
    """int over S^{m-1} of exp(i w sigma_1): (2 pi)^{m/2} J_{m/2-1}(w) / w^{m/2-1}."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return (2 * math.pi) ** (0.5 * m) * bessel_ratio(m - 2, w)


def sphere_ft_dual(m: int, w) -> np.ndarray:
    """(2 pi)^{m/2} J_{m/2}(w) / w^{m/2}, so that -d/dw sphere_ft(m, w) = w * sphere_ft_dual(m, w)."""
    return (2 * math.pi) ** (0.5 * m) * bessel_ratio(m, w)


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^{k-1} in R^k (2 for k = 1)."""
    return 2.0 * math.pi ** (0.5 * k) / math.gamma(0.5 * k)
