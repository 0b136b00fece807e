"""Heat kernel p_t on H-type groups and its gradient components.

p_1(x, z) = (2 pi)^{-m} (4 pi)^{-n} int_{R^m} e^{i<lam,z>} (|lam|/sinh|lam|)^n
            exp(-|lam| coth|lam| |x|^2 / 4) dlam

is radial in x and z.  Two independent evaluators are provided:

* ``p1`` reduces the lam-integral to a radial one with the sphere Fourier
  transform (Bessel ratio) and integrates over rho in [0, R] adaptively.
* ``p1_hankel`` (odd m) expands the sphere transform into the finite Hankel
  series and integrates each term e^{i rho s}(-i rho)^k(...) over a horizontal
  line Im rho = c with 0 <= c < pi.  The integrand is analytic in the strip
  |Im rho| < pi, so the line can be moved freely; putting it through the
  critical point on the imaginary axis removes the oscillatory cancellation
  that limits the real-line quadrature at large distance.

q1 and q2 are the bare lam-integrals with amplitudes
(|lam|/sinh|lam|)^{n+1} cosh|lam| and (|lam|/sinh|lam|)^n (-i<lam, z/|z|>), so
that grad p_1 = -C |x| (q1 xhat + q2 J_zhat xhat) / 2 with
C = (2 pi)^{-m} (4 pi)^{-n}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import hankel1e

from .algebra import GroupPoint, HTypeStructure, bracket, j_apply
from .bessel import sphere_area, sphere_ft, sphere_ft_dual
from .geometry import cc_distance, nu_inv
from .quadrature import NODES, WG7, WK15, EPS, integrate, uniform_breakpoints

KINDS = ("p", "q1", "q2")
LARGE_D0 = 6.0  # above this the real-line quadrature starts losing digits


@dataclass(frozen=True)
class KernelQuery:
    n: int
    m: int
    t: float = 1.0
    r: float = 0.0
    s: float = 0.0
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.r < 0 or self.s < 0:
            raise ValueError("|x| and |z| must be nonnegative")
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")


@dataclass(frozen=True)
class EvalResult:
    value: float
    abs_err_estimate: float
    method: str
    converged: bool = True
    log_value: float = math.nan
    flags: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "err": self.abs_err_estimate,
            "method": self.method,
            "converged": self.converged,
            "log_value": self.log_value,
            "flags": list(self.flags),
        }


def normalization(n: int, m: int) -> float:
    return (2 * math.pi) ** (-m) * (4 * math.pi) ** (-n)


# ----------------------------------------------------------- amplitudes


def rho_over_sinh(rho):
    rho = np.asarray(rho)
    small = np.abs(rho) < 1e-4
    safe = np.where(small, 1.0, rho)
    with np.errstate(over="ignore"):
        big = safe / np.sinh(safe)
    r2 = rho * rho
    return np.where(small, 1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0, big)


def rho_coth(rho):
    rho = np.asarray(rho)
    small = np.abs(rho) < 1e-4
    safe = np.where(small, 1.0, rho)
    big = safe / np.tanh(safe)
    r2 = rho * rho
    return np.where(small, 1.0 + r2 / 3.0 - r2 * r2 / 45.0, big)


def mehler(t: float, lam: float, r: float, n: int) -> float:
    """m_{t,lam}(x) = (lam / (4 pi sinh(t lam)))^n exp(-lam coth(t lam) |x|^2 / 4)."""
    if not t > 0:
        raise ValueError("t must be positive")
    lam = abs(float(lam))
    tl = t * lam
    a = float(rho_over_sinh(tl)) / (4 * math.pi * t)
    b = float(rho_coth(tl)) / (4 * t)
    return a**n * math.exp(-b * r * r)


def mehler_mass(t: float, lam: float, n: int, rel_tol: float = 1e-12) -> float:
    """int_{R^{2n}} m_{t,lam}(x) dx by radial quadrature (expected cosh(t lam)^{-n})."""
    b = float(rho_coth(t * abs(lam))) / (4 * t)
    R = math.sqrt((40.0 + 2 * n * math.log(2 + 1 / b)) / b)
    f = lambda r: np.array([mehler(t, lam, float(x), n) for x in r]) * r ** (2 * n - 1)
    res = integrate(f, np.linspace(0, R, 9), rel_tol=rel_tol)
    return sphere_area(2 * n) * float(res.value)


def _tail_radius(n: int, extra_power: float, decay: float, log_target: float, r_min: float = 30.0) -> float:
    """Smallest R >= r_min with (2R)^n R^p e^{-decay R} / decay below exp(log_target)."""
    R = r_min
    while n * math.log(2 * R) + extra_power * math.log(R) - decay * R - math.log(decay) > log_target:
        R += 2.0
        if R > 2000:
            break
    return R


# ----------------------------------------------------------- Bessel route


def _bessel_integrand(kind: str, n: int, m: int, r: float, s: float):
    rr = 0.25 * r * r

    def f(rho):
        base = rho_over_sinh(rho) ** n * np.exp(-rr * rho_coth(rho)) * rho ** (m - 1)
        if kind == "p":
            return sphere_ft(m, rho * s) * base
        if kind == "q1":
            return sphere_ft(m, rho * s) * base * rho_coth(rho)
        return sphere_ft_dual(m, rho * s) * base * rho * rho * s

    return f


def _bessel_breakpoints(n: int, m: int, r: float, s: float, rel_tol: float, d0: float):
    # tail bound uses |sphere_ft| <= area(S^{m-1}); extra powers from q1/q2 amplitudes
    log_target = math.log(1e-3 * rel_tol) - 0.25 * min(d0, 40.0) ** 2 - 2.0
    R = _tail_radius(n, m + 2, n + 0.25 * r * r, log_target)
    width = 1.0 if s <= 1 else math.pi / (4 * s)
    return uniform_breakpoints(0.0, R, width)


def _bessel_eval(kind: str, q: KernelQuery, breakpoints=None, fixed: bool = False) -> EvalResult:
    n, m, r, s = q.n, q.m, q.r, q.s
    d0 = cc_distance(r, s).d
    if breakpoints is None:
        breakpoints = _bessel_breakpoints(n, m, r, s, q.rel_tol, d0)
    res = integrate(_bessel_integrand(kind, n, m, r, s), breakpoints, rel_tol=0.1 * q.rel_tol, fixed=fixed)
    scale = normalization(n, m) if kind == "p" else 1.0
    val = scale * float(np.real(res.value))
    err = scale * res.abs_err
    flags = []
    if err > q.rel_tol * abs(val):
        flags.append("best-effort: cancellation floor")
    if kind == "p" and not val > 0:
        flags.append("nonpositive")
    logv = math.log(val) if val > 0 else math.nan
    return EvalResult(val, err, "bessel-quadrature", res.converged, logv, tuple(flags))


# ----------------------------------------------------------- Hankel route


def hankel_coefficient(m: int, k: int) -> float:
    """c_{m,k} = (m-k-2)! / (2^{(m-1)/2-k} ((m-1)/2-k)! (k-1)!), odd m >= 3, 1 <= k <= (m-1)/2."""
    if m % 2 == 0 or m < 3:
        raise ValueError("Hankel coefficients are defined for odd m >= 3")
    h = (m - 1) // 2
    if not 1 <= k <= h:
        raise ValueError("k out of range")
    return math.factorial(m - k - 2) / (2 ** (h - k) * math.factorial(h - k) * math.factorial(k - 1))


def sphere_ft_hankel(m: int, w):
    """Finite Hankel form of sphere_ft for odd m (m = 1 gives 2 cos w)."""
    w = np.asarray(w, dtype=float)
    if m == 1:
        return 2 * np.cos(w)
    h = (m - 1) // 2
    acc = np.zeros_like(w, dtype=complex)
    for k in range(1, h + 1):
        acc += hankel_coefficient(m, k) * (-1j * w) ** k
    return 2 * (2 * math.pi) ** h * np.real(np.exp(1j * w) / w ** (m - 1) * acc)


def _log_rho_over_sinh(rho):
    rho = np.asarray(rho, dtype=complex)
    small = np.abs(rho) < 1e-3
    # log sinh(rho) = |rho| + log((1 - e^{-2|rho|})/2), sign handled by rho -> -rho
    sgn = np.where(np.real(rho) >= 0, 1.0, -1.0)
    a = sgn * np.where(small, 1.0, rho)
    log_sinh = a + np.log(-np.expm1(-2 * a)) - math.log(2.0)
    big = np.log(np.where(small, 1.0, rho) * sgn) - log_sinh
    r2 = rho * rho
    return np.where(small, -r2 / 6.0 + r2 * r2 / 180.0, big)


def contour_height(r: float, s: float) -> float:
    """Height c of the integration line: the critical point theta, kept a
    distance 1/(1+s) below the singularity at i pi."""
    if s == 0:
        return 0.0
    cap = math.pi - 1.0 / (1.0 + s)
    # r * r underflowing to 0 puts the critical point past the cap
    if r * r == 0:
        return cap
    return min(nu_inv(4 * s / (r * r)), cap)


def _hankel_line_integral(n: int, r: float, s: float, k: int, amp: str, rel_tol: float, d0: float):
    """e^{d0^2/4} * int_R e^{i rho s}(-i rho)^k A(rho) drho along Im rho = c, with
    A = (rho/sinh)^n e^{-r^2 rho coth/4} (amp "p") or that times rho coth (amp "q1")."""
    c = contour_height(r, s)
    rr = 0.25 * r * r
    shift = 0.25 * d0 * d0

    def f(u):
        rho = u + 1j * c
        expo = 1j * rho * s - rr * rho_coth(rho) + n * _log_rho_over_sinh(rho) + shift
        val = np.exp(expo) * (-1j * rho) ** k
        if amp == "q1":
            val = val * rho_coth(rho)
        return val

    # tail: |integrand| <= e^{shift - c s} (2|rho|)^n |rho|^{k+1} e^{-(n + r^2/4)|u|}
    log_target = math.log(1e-3 * rel_tol) - (shift - c * s) - 2.0
    U = _tail_radius(n, k + 2, n + rr, log_target, r_min=20.0)
    width = 1.0 if s <= 1 else math.pi / (4 * s)
    w0 = min(1.0, max(math.pi - c, 1e-6))
    near = []
    while w0 < 1.0:
        near.extend([-w0, w0])
        w0 *= 2.0
    bp = uniform_breakpoints(-U, U, width, extra=near + [0.0])
    return integrate(f, bp, rel_tol=0.1 * rel_tol)


def _hankel_eval(kind: str, q: KernelQuery) -> EvalResult:
    n, m, r, s = q.n, q.m, q.r, q.s
    if m % 2 == 0:
        raise ValueError("the Hankel evaluator needs odd m")
    if m >= 3 and s == 0:
        raise ValueError("the Hankel evaluator needs |z| > 0 when m >= 3")
    d0 = cc_distance(r, s).d
    shift = 0.25 * d0 * d0
    h = (m - 1) // 2
    amp = "q1" if kind == "q1" else "p"
    kmax = h + 1 if kind == "q2" else h
    kmin = 0 if m == 1 else 1
    I, E, ok = {}, {}, True
    for k in range(kmin, kmax + 1):
        res = _hankel_line_integral(n, r, s, k, amp, q.rel_tol, d0)
        I[k], E[k] = float(np.real(res.value)), res.abs_err
        ok &= res.converged
    coef = {0: 1.0} if m == 1 else {k: hankel_coefficient(m, k) for k in range(1, h + 1)}
    ch = (2 * math.pi) ** (-(m + 1) / 2) * (4 * math.pi) ** (-n)
    ratio = ch / normalization(n, m)
    total, err = 0.0, 0.0
    for k, c in coef.items():
        if kind in ("p", "q1"):
            w = c * s ** (k - m + 1)
            total += w * I[k]
            err += abs(w) * E[k]
        else:
            # q2 = -(1/C) dp/ds, and d/ds I_k = -I_{k+1}
            w0 = -c * (k - m + 1) * s ** (k - m) if k - m + 1 else 0.0
            w1 = c * s ** (k - m + 1)
            total += w0 * I[k] + w1 * I[k + 1]
            err += abs(w0) * E[k] + abs(w1) * E[k + 1]
    scale = ch if kind == "p" else ratio
    scaled, scaled_err = scale * total, scale * err
    val = scaled * math.exp(-shift)
    flags = []
    if kind == "p" and not scaled > 0:
        flags.append("nonpositive")
    logv = math.log(scaled) - shift if scaled > 0 else math.nan
    return EvalResult(val, scaled_err * math.exp(-shift), "hankel-series", ok, logv, tuple(flags))


# ----------------------------------------------------------- shifted Bessel line


def _contour_eval(kind: str, q: KernelQuery) -> EvalResult:
    """Bessel radial form with J replaced by Re H^(1), integrated along Im rho = c.

    On the segment [0, ic] the H^(1) integrand is purely imaginary, so the real
    part of the half-line integral from ic equals the real-axis integral.
    """
    n, m, r, s = q.n, q.m, q.r, q.s
    if s <= 0:
        raise ValueError("the shifted-line evaluator needs |z| > 0")
    d0 = cc_distance(r, s).d
    shift = 0.25 * d0 * d0
    c = contour_height(r, s)
    rr = 0.25 * r * r
    nu = 0.5 * m - 1.0
    if kind == "q2":
        nu += 1.0
    lead = (2 * math.pi) ** (0.5 * m)

    def f(u):
        rho = u + 1j * c
        w = rho * s
        expo = 1j * w - rr * rho_coth(rho) + n * _log_rho_over_sinh(rho) + shift
        val = lead * hankel1e(nu, w) / w**nu * np.exp(expo) * rho ** (m - 1)
        if kind == "q1":
            val = val * rho_coth(rho)
        elif kind == "q2":
            val = val * rho * w
        return val

    log_target = math.log(1e-3 * q.rel_tol) - (shift - c * s) - 2.0
    U = _tail_radius(n, m + 2, n + rr, log_target, r_min=20.0)
    width = 1.0 if s <= 1 else math.pi / (4 * s)
    w0 = min(1.0, max(math.pi - c, 1e-6))
    near = []
    while w0 < 1.0:
        near.append(w0)
        w0 *= 2.0
    res = integrate(f, uniform_breakpoints(0.0, U, width, extra=near), rel_tol=0.1 * q.rel_tol)
    scale = normalization(n, m) if kind == "p" else 1.0
    scaled = scale * float(np.real(res.value))
    err = scale * res.abs_err
    flags = []
    if kind == "p" and not scaled > 0:
        flags.append("nonpositive")
    logv = math.log(scaled) - shift if scaled > 0 else math.nan
    return EvalResult(scaled * math.exp(-shift), err * math.exp(-shift), "bessel-contour", res.converged, logv, tuple(flags))


def use_contour(r: float, s: float) -> bool:
    """Real-line quadrature loses about e^{(d0^2 - |x|^2)/4} relative; switch lines there."""
    return s > 1.0 and cc_distance(r, s).d > LARGE_D0


# ----------------------------------------------------------- public evaluators


def _require_unit_time(q: KernelQuery):
    if q.t != 1.0:
        raise ValueError("this evaluator works at t = 1; use pt for other times")


def _dispatch(kind: str, q: KernelQuery, method: str) -> EvalResult:
    if method not in ("auto", "bessel", "contour", "hankel"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "contour" if use_contour(q.r, q.s) else "bessel"
    if method == "hankel":
        return _hankel_eval(kind, q)
    if method == "contour":
        return _contour_eval(kind, q)
    return _bessel_eval(kind, q)


def p1(q: KernelQuery, method: str = "auto", breakpoints=None, fixed: bool = False) -> EvalResult:
    """p_1 via the Bessel radial reduction.

    method "bessel" integrates on the real rho axis; "contour" on the shifted
    line; "auto" picks the line once the real-axis cancellation would cost digits.
    """
    _require_unit_time(q)
    if breakpoints is not None or fixed:
        return _bessel_eval("p", q, breakpoints, fixed)
    return _dispatch("p", q, method)


def p1_hankel(q: KernelQuery) -> EvalResult:
    """p_1 via the finite Hankel series on a shifted line (odd m)."""
    _require_unit_time(q)
    return _hankel_eval("p", q)


def q1(q: KernelQuery, method: str = "auto") -> EvalResult:
    """Bare integral with amplitude (rho/sinh)^{n+1} cosh; equals -(2/(C|x|)) dp_1/d|x|."""
    _require_unit_time(q)
    return _dispatch("q1", q, method)


def q2(q: KernelQuery, method: str = "auto") -> EvalResult:
    """Bare integral with the extra factor -i<lam, zhat>; equals -(1/C) dp_1/d|z|."""
    _require_unit_time(q)
    if q.s == 0:
        return EvalResult(0.0, 0.0, "bessel-quadrature", True)
    return _dispatch("q2", q, method)


def pt(q: KernelQuery, method: str = "auto") -> EvalResult:
    """p_t(x, z) = t^{-(n+m)} p_1(x / sqrt(t), z / t)."""
    t = float(q.t)
    q1_ = KernelQuery(q.n, q.m, 1.0, q.r / math.sqrt(t), q.s / t, q.rel_tol)
    base = p1_hankel(q1_) if method == "hankel" else p1(q1_, method)
    if t == 1.0:
        return base
    f = t ** (-(q.n + q.m))
    return EvalResult(
        base.value * f,
        base.abs_err_estimate * f,
        "scaling+" + base.method,
        base.converged,
        base.log_value - (q.n + q.m) * math.log(t),
        base.flags,
    )


def log_p1(q: KernelQuery) -> float:
    """log p_1 with e^{-d0^2/4} factored out (shifted line whenever |z| > 0)."""
    _require_unit_time(q)
    if q.s > 0:
        return _contour_eval("p", q).log_value
    return p1(q, "bessel").log_value


def grad_p1(q: KernelQuery, method: str = "auto") -> tuple[float, float, float]:
    """(q1, q2, |grad p_1|) with |grad p_1| = C |x| sqrt(q1^2 + q2^2) / 2."""
    a = q1(q, method).value
    b = q2(q, method).value
    return a, b, 0.5 * normalization(q.n, q.m) * q.r * math.hypot(a, b)


def grad_p1_vector(s: HTypeStructure, g: GroupPoint, rel_tol: float = 1e-9) -> np.ndarray:
    """Horizontal gradient (X_1 p_1, ..., X_2n p_1) at g."""
    r, sz = g.norms
    q = KernelQuery(s.n, s.m, 1.0, r, sz, rel_tol)
    if r == 0:
        return np.zeros(2 * s.n)
    a = q1(q).value
    b = q2(q).value if sz > 0 else 0.0
    xhat = g.x / r
    jx = j_apply(s, g.z / sz, xhat) if sz > 0 else np.zeros_like(xhat)
    return -0.5 * normalization(s.n, s.m) * r * (a * xhat + b * jx)


# ----------------------------------------------------------- batch evaluation


def _panel_sums(vals: np.ndarray, h: float):
    """Per-row Kronrod sum and QUADPACK-style error for a (rows, panels, 15) block."""
    k = h * (vals @ WK15)
    g = h * (vals @ WG7)
    absk = h * (np.abs(vals) @ WK15)
    mean = k / (2 * h)
    resasc = h * (np.abs(vals - mean[..., None]) @ WK15)
    raw = np.abs(k - g)
    with np.errstate(invalid="ignore", divide="ignore"):
        err = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * raw / resasc) ** 1.5), raw)
    err = np.maximum(err, 50 * EPS * absk)
    return k.sum(-1), err.sum(-1), absk.sum(-1)


def kernel_batch(
    n: int,
    m: int,
    r,
    s,
    kind: str = "p",
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    max_nodes: int = 2_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Bessel-route evaluation of p_1, q1 or q2 at many (|x|, |z|).

    Composite 15-point Kronrod panels on [0, R].  A point whose error estimate
    misses max(rel_tol |value|, abs_tol) while sitting above its rounding floor
    is redone with panels half as wide.  Returns (values, abs_err).
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    r, s = np.broadcast_arrays(r, s)
    shape = r.shape
    r, s = r.ravel(), s.ravel()
    out = np.empty(r.size)
    err = np.empty(r.size)
    scale = normalization(n, m) if kind == "p" else 1.0
    tol = (rel_tol, abs_tol / scale)
    # chunks of similar |z| share one panel width
    order = np.argsort(s, kind="stable")
    for i in range(0, r.size, 256):
        idx = order[i : i + 256]
        smax = float(s[idx].max())
        # wider than the single-point rule; per-point refinement guards accuracy
        width = 1.0 if smax <= math.pi else math.pi / smax
        _batch_chunk(kind, n, m, r, s, idx, width, tol, out, err, max_nodes)
    return (scale * out).reshape(shape), (scale * err).reshape(shape)


def _tail_radius_many(n, extra_power, decay, log_target, r_min=30.0):
    R = np.full(np.shape(decay), r_min)
    for _ in range(1000):
        over = n * np.log(2 * R) + extra_power * np.log(R) - decay * R - np.log(decay) > log_target
        if not np.any(over):
            break
        R = np.where(over, R + 2.0, R)
    return R


def _batch_chunk(kind, n, m, r, s, idx, width, tol, out, err, max_nodes, depth=0):
    rel_tol, abs_tol = tol
    rc, sc = r[idx], s[idx]
    # d0 <= |x| + sqrt(4 pi |z|); no tail target below the rounding floor EPS e^{-|x|^2/4}
    d_up = np.minimum(rc + np.sqrt(4 * math.pi * sc), 40.0)
    log_target = np.maximum(math.log(1e-3 * rel_tol) - 0.25 * d_up**2, math.log(EPS) - 0.25 * rc**2) - 2.0
    if abs_tol > 0:
        log_target = np.maximum(log_target, math.log(1e-3 * abs_tol))
    R = _tail_radius_many(n, m + 2, n + 0.25 * rc**2, log_target)
    npan = np.ceil(R / width).astype(int)
    order = np.argsort(npan, kind="stable")
    top = int(npan.max())
    h = 0.5 * width
    nodes = ((np.arange(top) + 0.5) * width)[:, None] + h * NODES[None, :]
    nodes = nodes.ravel()
    base = rho_over_sinh(nodes) ** n * nodes ** (m - 1)
    coth = rho_coth(nodes)
    if kind == "q1":
        base = base * coth
    elif kind == "q2":
        base = base * nodes * nodes
    floor = np.empty(len(idx))
    j0 = 0
    while j0 < len(idx):
        k = int(npan[order[min(j0 + 63, len(idx) - 1)]])
        per = max(1, min(64, max_nodes // (15 * k)))
        sel = order[j0 : j0 + per]
        k = int(npan[sel].max())
        rr = rc[sel][:, None]
        ss = sc[sel][:, None]
        nd = nodes[: 15 * k]
        vals = np.exp(-0.25 * rr * rr * coth[None, : 15 * k]) * base[None, : 15 * k]
        if kind == "q2":
            vals *= sphere_ft_dual(m, nd[None, :] * ss) * ss
        else:
            vals *= sphere_ft(m, nd[None, :] * ss)
        v, e, a = _panel_sums(vals.reshape(len(sel), k, 15), h)
        out[idx[sel]] = v
        err[idx[sel]] = e
        floor[sel] = 1e3 * EPS * a
        j0 += per
    target = np.maximum(rel_tol * np.abs(out[idx]), abs_tol)
    bad = (err[idx] > target) & (err[idx] > floor)
    if np.any(bad) and depth < 3:
        _batch_chunk(kind, n, m, r, s, idx[bad], width / 2, tol, out, err, max_nodes, depth + 1)


# ----------------------------------------------------------- cross-checks


def normalization_integral(
    n: int, m: int, abs_tol: float = 1e-9, panels: int = 6, order: int = 8, r_max: float = 12.0, s_max: float = 12.0
) -> float:
    """int p_1 dm = area(S^{2n-1}) area(S^{m-1}) int int p_1(r, s) r^{2n-1} s^{m-1} dr ds."""
    x, w = np.polynomial.legendre.leggauss(order)

    def composite(hi):
        edges = np.linspace(0.0, hi, panels + 1)
        pts = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * x for a, b in zip(edges[:-1], edges[1:])])
        wts = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
        return pts, wts

    rr, wr = composite(r_max)
    ss, ws = composite(s_max)
    R, S = np.meshgrid(rr, ss, indexing="ij")
    vals, _ = kernel_batch(n, m, R, S, "p", rel_tol=1e-8, abs_tol=abs_tol)
    weights = np.outer(wr * rr ** (2 * n - 1), ws * ss ** (m - 1))
    return sphere_area(2 * n) * sphere_area(m) * float(np.sum(vals * weights))


def hadamard_check(n: int, m: int, r: float, s: float, tol: float = 1e-10) -> float:
    """Relative deviation of int_R p^{(n,m+1)}(x, (z, w)) dw from p^{(n,m)}(x, z)."""
    d0 = cc_distance(r, s).d
    # beyond W the integrand is below e^{-(d0^2 + 4 pi W)/4}-ish relative to the peak
    W = max(4.0, (4.0 * math.log(1.0 / tol) + 8.0) / math.pi)

    def f(w):
        vals, _ = kernel_batch(n, m + 1, np.full(w.shape, r), np.hypot(s, w), "p", 0.1 * tol)
        return vals

    res = integrate(f, np.linspace(0.0, W, 9), rel_tol=0.1 * tol)
    lhs = 2.0 * float(res.value)
    ref = p1(KernelQuery(n, m, 1.0, r, s, min(1e-2, 0.1 * tol))).value
    return abs(lhs - ref) / abs(ref)


def heat_residual(s: HTypeStructure, t: float, g: GroupPoint, h: float = 1e-3, rel_tol: float = 1e-12) -> float:
    """|(L - d/dt) p_t(g)| / p_t(g) with second-order central differences.

    All kernel values share one fixed panel layout, so the quadrature error is a
    smooth function of the evaluation point and does not pollute the differences.
    """
    n, m = s.n, s.m
    x0 = np.asarray(g.x, float)
    z0 = np.asarray(g.z, float)
    r0, s0 = float(np.linalg.norm(x0)), float(np.linalg.norm(z0))
    q0 = KernelQuery(n, m, 1.0, r0 / math.sqrt(t), s0 / t, 1e-8)
    d0 = cc_distance(q0.r, q0.s).d
    bp = _bessel_breakpoints(n, m, q0.r, (s0 + 4 * h) / (t - h), rel_tol, d0)
    bp = uniform_breakpoints(0.0, bp[-1], 0.25 * (bp[1] - bp[0]))

    def P(x, z, tt):
        rr, sz = float(np.linalg.norm(x)), float(np.linalg.norm(z))
        q = KernelQuery(n, m, 1.0, rr / math.sqrt(tt), sz / tt, 1e-8)
        return _bessel_eval("p", q, bp, fixed=True).value * tt ** (-(n + m))

    f0 = P(x0, z0, t)
    ex = np.eye(2 * n)
    ez = np.eye(m)
    lap_x = sum(P(x0 + h * ex[i], z0, t) - 2 * f0 + P(x0 - h * ex[i], z0, t) for i in range(2 * n)) / h**2
    lap_z = sum(P(x0, z0 + h * ez[j], t) - 2 * f0 + P(x0, z0 - h * ez[j], t) for j in range(m)) / h**2
    mixed = 0.0
    for j in range(m):
        Jx = s.J[j] @ x0
        for i in range(2 * n):
            if Jx[i] == 0:
                continue
            dxz = (
                P(x0 + h * ex[i], z0 + h * ez[j], t)
                - P(x0 + h * ex[i], z0 - h * ez[j], t)
                - P(x0 - h * ex[i], z0 + h * ez[j], t)
                + P(x0 - h * ex[i], z0 - h * ez[j], t)
            ) / (4 * h * h)
            mixed += Jx[i] * dxz
    dt = (P(x0, z0, t + h) - P(x0, z0, t - h)) / (2 * h)
    L = lap_x + mixed + 0.25 * float(x0 @ x0) * lap_z
    return abs(L - dt) / f0


def pt_batch(n: int, m: int, t: float, r, s, rel_tol: float = 1e-8) -> np.ndarray:
    """p_t at many (|x|, |z|) by scaling the batch p_1 evaluator."""
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    vals, _ = kernel_batch(n, m, r / math.sqrt(t), s / t, "p", rel_tol)
    return vals * t ** (-(n + m))


def semigroup_mc_check(s: HTypeStructure, t1: float, t2: float, g: GroupPoint, n_samples: int = 100_000,
                       seed: int = 0, steps: int = 1000, samples=None, rel_tol: float = 1e-8):
    """(p_{t1} * p_{t2})(g) = E_{k ~ p_{t2}} p_{t1}(g k^{-1}) against p_{t1+t2}(g).

    Returns (lhs, rhs, sigma) with sigma the MC standard error of lhs.  A batch
    of samples at time t2 may be passed to reuse paths across points.
    """
    from .simulate import SimConfig, mc_mean, simulate

    if samples is None:
        samples = simulate(SimConfig(s, t2, steps, n_samples, seed))
    elif abs(samples.t - t2) > 1e-15:
        raise ValueError("samples were drawn at a different time")
    gx = np.asarray(g.x, float)
    gz = np.asarray(g.z, float)
    # g * k^{-1} = (x - x_k, z - z_k - [x, x_k] / 2)
    wx = gx[None, :] - samples.x
    wz = gz[None, :] - samples.z - 0.5 * bracket(s, np.broadcast_to(gx, samples.x.shape), samples.x)
    vals = pt_batch(s.n, s.m, t1, np.linalg.norm(wx, axis=1), np.linalg.norm(wz, axis=1), rel_tol)
    lhs, sigma = mc_mean(vals)
    rhs = pt(KernelQuery(s.n, s.m, t1 + t2, *g.norms, min(rel_tol, 1e-2))).value
    return float(lhs), float(rhs), float(sigma)
