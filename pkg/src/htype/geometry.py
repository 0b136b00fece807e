"""Carnot-Caratheodory distance, minimizing geodesics and geodesic coordinates.

All closed forms use the identity J_eta^2 = -|eta|^2 I, so e^{t J_eta} is
cos(t|eta|) I + sin(t|eta|)/|eta| J_eta.  Small-angle cancellations
(a - sin a, 1 - cos a) go through series or half-angle forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import GroupPoint, HTypeStructure, group_inv, group_mul, j_apply, j_matrix

NU_SERIES_CUTOFF = 0.5
THETA_MAX = math.pi - 1e-12


@dataclass(frozen=True)
class GeodesicParams:
    xi0: np.ndarray
    eta0: np.ndarray
    straight: bool  # eta0 == 0

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.xi0))

    @property
    def theta(self) -> float:
        return 0.5 * float(np.linalg.norm(self.eta0))


@dataclass(frozen=True)
class DistanceResult:
    d: float
    theta: float  # nan on the x = 0 branch
    branch: str  # "z=0" | "x=0" | "generic"

    def __float__(self):
        return self.d


# ----------------------------------------------------------- scalar helpers


def x_minus_sin(a):
    """a - sin(a) without cancellation near 0."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    small = np.abs(a) < 1.0
    big = ~small
    out[big] = a[big] - np.sin(a[big])
    s = a[small]
    # a^3/3! - a^5/5! + ...; 12 terms are exact to rounding for |a| < 1
    term = s**3 / 6.0
    acc = np.zeros_like(s)
    for k in range(12):
        acc += term
        term = -term * s * s / ((2 * k + 4) * (2 * k + 5))
    out[small] = acc
    return out if out.ndim else float(out)


def one_minus_cos(a):
    return 2.0 * np.sin(0.5 * np.asarray(a, dtype=float)) ** 2


def sinc(a):
    """sin(a)/a with value 1 at 0."""
    a = np.asarray(a, dtype=float)
    return np.sinc(a / math.pi)


def theta_over_sin(theta):
    """theta / sin(theta), equal to 1 at 0."""
    return 1.0 / sinc(theta)


def nu(theta):
    """nu(theta) = (2 theta - sin 2 theta) / (1 - cos 2 theta) on [0, pi)."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0) or np.any(th >= math.pi) or not np.all(np.isfinite(th)):
        raise ValueError("nu is defined for theta in [0, pi)")
    out = np.empty_like(th)
    small = th < NU_SERIES_CUTOFF
    # 1 - cos 2 theta = 2 sin^2 theta, accurate everywhere
    t = th[~small]
    out[~small] = (2 * t - np.sin(2 * t)) / (2 * np.sin(t) ** 2)
    t = th[small]
    with np.errstate(invalid="ignore", divide="ignore"):
        val = x_minus_sin(np.atleast_1d(2 * t)) / (2 * np.sin(t) ** 2)
    out[small] = np.where(t == 0, 0.0, val)
    return out if out.ndim else float(out)


def nu_prime(theta: float) -> float:
    """Derivative of nu; series below 1e-3."""
    th = float(theta)
    if th < 1e-3:
        return 2.0 / 3.0 + (4.0 / 15.0) * th * th
    s = math.sin(th)
    # nu = theta / sin^2 - cot, so nu' = 2/sin^2 - 2 theta cos / sin^3
    return 2.0 * (s - th * math.cos(th)) / s**3


def nu_inv(y: float, tol: float = 1e-12) -> float:
    """The unique theta in [0, pi) with nu(theta) = y (bracketed Newton)."""
    y = float(y)
    if not y >= 0 or not math.isfinite(y):
        raise ValueError("nu_inv requires a finite y >= 0")
    if y == 0:
        return 0.0
    target = tol * (1.0 + y)
    lo, hi = 0.0, THETA_MAX
    if nu(hi) <= y:
        return hi
    # starting guess from the two asymptotic regimes
    th = min(1.5 * y, 3.0) if y < 1.0 else math.pi - math.sqrt(math.pi / y)
    th = min(max(th, 1e-300), hi)
    for _ in range(200):
        f = nu(th) - y
        if abs(f) <= target:
            return th
        if f > 0:
            hi = th
        else:
            lo = th
        step = f / nu_prime(th)
        cand = th - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if cand == th or hi - lo < 1e-16 * max(1.0, hi):
            return cand
        th = cand
    return th


def cc_distance(r: float, s: float) -> DistanceResult:
    """Distance from the identity to any point with |x| = r, |z| = s."""
    r, s = float(r), float(s)
    if r < 0 or s < 0 or not (math.isfinite(r) and math.isfinite(s)):
        raise ValueError("|x| and |z| must be finite and nonnegative")
    if s == 0:
        return DistanceResult(r, 0.0, "z=0")
    if r == 0:
        return DistanceResult(math.sqrt(4 * math.pi * s), math.nan, "x=0")
    scale = max(r, math.sqrt(s))
    if not 1e-100 < scale < 1e100:
        # r^2 and 4s/r^2 would under- or overflow; d is 1-homogeneous under dilation
        res = cc_distance(r / scale, s / scale / scale)
        return DistanceResult(scale * res.d, res.theta, res.branch)
    if r * r < 1e-16 * s:
        # nu(pi - eps) = pi / eps^2 + O(1); 4s/r^2 may overflow here
        eps = r * math.sqrt(math.pi / (4 * s))
        th = math.pi - eps
        # r^2 / tan(eps) = r sqrt(4s/pi) * eps / tan(eps), finite as eps -> 0
        corr = r * math.sqrt(4 * s / math.pi) * math.cos(eps) / float(sinc(eps))
        return DistanceResult(math.sqrt(th * (4 * s - corr)), th, "generic")
    th = nu_inv(4 * s / (r * r))
    if th < 0.5 * math.pi:
        return DistanceResult(r * float(theta_over_sin(th)), th, "generic")
    # sin(theta) loses relative accuracy near pi; use r^2 theta / sin^2 = 4s + r^2 cot
    return DistanceResult(math.sqrt(th * (4 * s + r * r / math.tan(th))), th, "generic")


def cc_distance_many(r, s) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    r, s = np.broadcast_arrays(r, s)
    return np.array([cc_distance(a, b).d for a, b in zip(r.ravel(), s.ravel())]).reshape(r.shape)


def point_distance(g: GroupPoint) -> float:
    r, s = g.norms
    return cc_distance(r, s).d


def distance(s: HTypeStructure, g: GroupPoint, h: GroupPoint) -> float:
    """Left-invariant distance d(g, h) = d(0, g^{-1} h)."""
    return point_distance(group_mul(s, group_inv(g), h))


def z_from_distance(r: float, d: float) -> float:
    """|z| such that cc_distance(r, |z|) = d, for 0 < r <= d (r = 0 allowed)."""
    r, d = float(r), float(d)
    if r < 0 or d < r:
        raise ValueError("need 0 <= |x| <= d")
    if r == 0:
        return d * d / (4 * math.pi)
    if d == r:
        return 0.0
    # solve theta / sin theta = d / r on (0, pi)
    ratio = d / r
    lo, hi = 0.0, math.pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(theta_over_sin(mid)) < ratio:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    th = 0.5 * (lo + hi)
    return r * r * float(nu(min(th, THETA_MAX))) / 4.0


def distance_ratio_f(theta):
    """F(theta) = (theta/sin theta)^2 / (1 + nu(theta)) = d^2 / (|x|^2 + 4|z|)."""
    return theta_over_sin(theta) ** 2 / (1.0 + nu(theta))


# ----------------------------------------------------------- geodesics


def geodesic_from_endpoint(s: HTypeStructure, g: GroupPoint, branch: int = 1) -> GeodesicParams:
    """Initial covectors of the minimizing geodesic from the identity to g.

    branch > 1 selects the k-th loop family when x = 0 (|eta0| = 2 pi k); these
    are not minimizing.
    """
    x = np.asarray(g.x, float)
    z = np.asarray(g.z, float)
    r, sz = float(np.linalg.norm(x)), float(np.linalg.norm(z))
    if r == 0 and sz == 0:
        raise ValueError("geodesic_from_endpoint needs a point other than the identity")
    if sz == 0:
        return GeodesicParams(x.copy(), np.zeros(s.m), True)
    zhat = z / sz
    # subnormal |x| is treated as 0; the endpoint error is of order |x|
    if r * r == 0:
        k = int(branch)
        if k < 1:
            raise ValueError("branch index must be >= 1")
        eta0 = 2 * math.pi * k * zhat
        # the direction of xi0 is free here; a fixed basis direction is returned
        xi0 = np.zeros(2 * s.n)
        xi0[0] = math.sqrt(4 * math.pi * k * sz)
        return GeodesicParams(xi0, eta0, False)
    th = nu_inv(4 * sz / (r * r))
    eta0 = 2 * th * zhat
    # -|eta|^2 (J (e^J - I))^{-1} x simplifies to theta cot(theta) x - J_eta x / 2
    xi0 = (th / math.tan(th)) * x - 0.5 * j_apply(s, eta0, x)
    return GeodesicParams(xi0, eta0, False)


def geodesic_params_direct(s: HTypeStructure, g: GroupPoint) -> GeodesicParams:
    """Same as geodesic_from_endpoint via the unsimplified linear solve (oracle)."""
    x = np.asarray(g.x, float)
    z = np.asarray(g.z, float)
    r, sz = float(np.linalg.norm(x)), float(np.linalg.norm(z))
    th = nu_inv(4 * sz / (r * r))
    eta0 = 2 * th * z / sz
    a = float(np.linalg.norm(eta0))
    Je = j_matrix(s, eta0)
    I = np.eye(2 * s.n)
    expJ = math.cos(a) * I + (math.sin(a) / a) * Je
    xi0 = -(a * a) * np.linalg.solve(Je @ (expJ - I), x)
    return GeodesicParams(xi0, eta0, False)


def geodesic_point(s: HTypeStructure, params: GeodesicParams, t: float) -> GroupPoint:
    t = float(t)
    xi0 = np.asarray(params.xi0, float)
    eta0 = np.asarray(params.eta0, float)
    a = float(np.linalg.norm(eta0))
    if params.straight or a == 0:
        return GroupPoint(t * xi0, np.zeros(s.m))
    Jxi = j_apply(s, eta0, xi0)
    at = a * t
    # x(t) = (1 - cos(at))/a^2 J xi0 + sin(at)/a xi0
    x = float(one_minus_cos(at)) / (a * a) * Jxi + t * float(sinc(at)) * xi0
    z = float(xi0 @ xi0) / (2 * a**3) * float(x_minus_sin(at)) * eta0
    return GroupPoint(x, z)


def geodesic_velocity(s: HTypeStructure, params: GeodesicParams, t: float) -> np.ndarray:
    """x'(t) = e^{t J_eta} xi0."""
    xi0 = np.asarray(params.xi0, float)
    eta0 = np.asarray(params.eta0, float)
    a = float(np.linalg.norm(eta0))
    if params.straight or a == 0:
        return xi0.copy()
    return math.cos(a * t) * xi0 + t * float(sinc(a * t)) * j_apply(s, eta0, xi0)


def geodesic_path(s: HTypeStructure, params: GeodesicParams, ts) -> np.ndarray:
    """Rows (t, x_1..x_2n, z_1..z_m)."""
    rows = []
    for t in ts:
        g = geodesic_point(s, params, t)
        rows.append(np.concatenate([[t], g.x, g.z]))
    return np.array(rows)


def horizontality_residual(s: HTypeStructure, params: GeodesicParams, t: float, h: float = 1e-4) -> float:
    """|z' - [x, x']/2| with both derivatives by central differences."""
    from .algebra import bracket

    gp = geodesic_point(s, params, t + h)
    gm = geodesic_point(s, params, t - h)
    g0 = geodesic_point(s, params, t)
    zdot = (gp.z - gm.z) / (2 * h)
    xdot = (gp.x - gm.x) / (2 * h)
    return float(np.linalg.norm(zdot - 0.5 * bracket(s, g0.x, xdot)))


# ----------------------------------------------------------- geodesic coordinates


def phi(s: HTypeStructure, u, eta) -> GroupPoint:
    """Geodesic coordinates ((I - e^{J_eta}) u, |u|^2/2 (1 - sin|eta|/|eta|) eta)."""
    u = np.asarray(u, float)
    eta = np.asarray(eta, float)
    a = float(np.linalg.norm(eta))
    if not 0 < a < 2 * math.pi:
        raise ValueError("|eta| must lie in (0, 2 pi)")
    x = float(one_minus_cos(a)) * u - float(sinc(a)) * j_apply(s, eta, u)
    z = 0.5 * float(u @ u) * float(x_minus_sin(a)) / a * eta
    return GroupPoint(x, z)


def jacobian_a(u_norm: float, eta_norm: float, n: int, m: int) -> float:
    """Jacobian determinant of phi, as a function of |u| and |eta|."""
    u, a = float(u_norm), float(eta_norm)
    if not u > 0:
        raise ValueError("|u| must be positive")
    if not 0 < a < 2 * math.pi:
        raise ValueError("|eta| must lie in (0, 2 pi)")
    half_gap = 0.5 * float(x_minus_sin(a)) / a  # 1/2 - sin a / (2a)
    omc = float(one_minus_cos(a))
    last = 2 * omc - a * math.sin(a)
    return u ** (2 * m) * half_gap ** (m - 1) * (2 * omc) ** (n - 1) * last


def jacobian_envelope(u_norm: float, eta_norm: float, n: int, m: int) -> float:
    a = float(eta_norm)
    return float(u_norm) ** (2 * m) * a ** (2 * (m + n)) * (2 * math.pi - a) ** (2 * n - 1)


def jacobian_fd(s: HTypeStructure, u, eta, h: float = 1e-6) -> float:
    """|det| of the central-difference Jacobian of phi in (u, eta)."""
    u = np.asarray(u, float)
    eta = np.asarray(eta, float)
    v = np.concatenate([u, eta])
    d2n = 2 * s.n
    dim = v.size

    def f(w):
        g = phi(s, w[:d2n], w[d2n:])
        return np.concatenate([g.x, g.z])

    Jac = np.empty((dim, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        Jac[:, k] = (f(v + e) - f(v - e)) / (2 * h)
    return abs(float(np.linalg.det(Jac)))
