"""Envelope functions for p_1 and |grad p_1| and grid scans of the ratios.

Scans report the observed range of kernel / envelope over a grid; they do not
certify constants.  Grids are logarithmic in d0 and in |x| / d0 so that both
the z-dominated (|x| -> 0) and x-dominated (|z| -> 0) regimes are covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import z_from_distance
from .heatkernel import kernel_batch, normalization

KINDS = ("kernel", "gradient", "crude-gradient", "vertical-gradient")


@dataclass(frozen=True)
class EnvelopeSpec:
    n: int
    m: int
    kind: str = "kernel"
    d0_min: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.d0_min > 0:
            raise ValueError("d0_min must be positive")

    @property
    def exponents(self) -> tuple[float, float]:
        """(power of d0, power of |x| d0 in the denominator)."""
        if self.kind == "gradient":
            return 2 * self.n - self.m + 1, self.n + 0.5
        return 2 * self.n - self.m - 1, self.n - 0.5


@dataclass(frozen=True)
class ScanGrid:
    d_lo: float = 2.0
    d_hi: float = 10.0
    n_d: int = 30
    n_x: int = 30
    x_frac_min: float = 1e-3

    def __post_init__(self):
        if not 0 < self.d_lo <= self.d_hi:
            raise ValueError("need 0 < d_lo <= d_hi")
        if self.n_d < 2 or self.n_x < 2:
            raise ValueError("grids need at least 2 points per axis")
        if not 0 < self.x_frac_min < 1:
            raise ValueError("x_frac_min must lie in (0, 1)")

    def refined(self, factor: int = 2) -> "ScanGrid":
        return ScanGrid(self.d_lo, self.d_hi, factor * self.n_d, factor * self.n_x, self.x_frac_min)

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Arrays (|x|, |z|, d0) of shape (n_d, n_x)."""
        d = np.geomspace(self.d_lo, self.d_hi, self.n_d)
        frac = np.geomspace(self.x_frac_min, 1.0, self.n_x)
        D, F = np.meshgrid(d, frac, indexing="ij")
        R = D * F
        S = np.array([[z_from_distance(r, dd) for r, dd in zip(rr, drow)] for rr, drow in zip(R, D)])
        return R, S, D

    def describe(self) -> dict:
        return {
            "d0": [self.d_lo, self.d_hi, self.n_d],
            "x_over_d0": [self.x_frac_min, 1.0, self.n_x],
            "spacing": "geometric",
        }


@dataclass(frozen=True)
class ScanReport:
    grid: dict
    min_ratio: float
    max_ratio: float
    argmin: tuple
    argmax: tuple
    n_points: int
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_ratio) and self.min_ratio > 0 and self.min_ratio <= self.max_ratio)

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio if self.min_ratio > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "argmin": list(self.argmin),
            "argmax": list(self.argmax),
            "n_points": self.n_points,
            "passed": self.passed,
            **self.extra,
        }


# ----------------------------------------------------------- envelopes


def kernel_envelope(n: int, m: int, r, d):
    """d^{2n-m-1} / (1 + (|x| d)^{n-1/2}) e^{-d^2/4}."""
    r, d = np.asarray(r, float), np.asarray(d, float)
    if np.any(d < 0) or np.any(r < 0):
        raise ValueError("|x| and d must be nonnegative")
    with np.errstate(divide="ignore"):
        return d ** (2 * n - m - 1) / (1 + (r * d) ** (n - 0.5)) * np.exp(-0.25 * d * d)


def gradient_envelope(n: int, m: int, r, d):
    """|x| d^{2n-m+1} / (1 + (|x| d)^{n+1/2}) e^{-d^2/4}."""
    r, d = np.asarray(r, float), np.asarray(d, float)
    if np.any(d < 0) or np.any(r < 0):
        raise ValueError("|x| and d must be nonnegative")
    return r * d ** (2 * n - m + 1) / (1 + (r * d) ** (n + 0.5)) * np.exp(-0.25 * d * d)


def kernel_envelope_t(n: int, m: int, t: float, r, d):
    """Time-dependent form t^{-m-n} (1 + (d/sqrt t)^{2n-m-1}) / (1 + (|x| d / t)^{n-1/2}) e^{-d^2/4t}.

    Satisfies envelope_t(t, r, d) = t^{-(n+m)} envelope_t(1, r/sqrt t, d/sqrt t).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    r, d = np.asarray(r, float), np.asarray(d, float)
    a = d / math.sqrt(t)
    return t ** (-m - n) * (1 + a ** (2 * n - m - 1)) / (1 + (r * d / t) ** (n - 0.5)) * np.exp(-0.25 * a * a)


def gradient_envelope_t(n: int, m: int, t: float, r, d):
    """t^{-m-n-1/2} (|x|/sqrt t)(1 + (d/sqrt t)^{2n-m+1}) / (1 + (|x| d / t)^{n+1/2}) e^{-d^2/4t}."""
    if not t > 0:
        raise ValueError("t must be positive")
    r, d = np.asarray(r, float), np.asarray(d, float)
    a = d / math.sqrt(t)
    b = r / math.sqrt(t)
    return t ** (-m - n - 0.5) * b * (1 + a ** (2 * n - m + 1)) / (1 + (b * a) ** (n + 0.5)) * np.exp(-0.25 * a * a)


def envelope_decreasing_from(n: int, m: int, r: float, d_max: float = 20.0, samples: int = 4001) -> float:
    """Smallest grid d* such that kernel_envelope(n, m, r, .) is decreasing on [d*, d_max]."""
    d = np.linspace(1e-6, d_max, samples)
    env = kernel_envelope(n, m, r, d)
    inc = np.nonzero(np.diff(env) > 0)[0]
    return float(d[inc[-1] + 1]) if inc.size else float(d[0])


# ----------------------------------------------------------- scans


def _gradient_norm(n, m, R, S, rel_tol):
    a, _ = kernel_batch(n, m, R, S, "q1", rel_tol)
    b, _ = kernel_batch(n, m, R, S, "q2", rel_tol)
    return 0.5 * normalization(n, m) * R * np.hypot(a, b)


def _report(ratio, R, S, D, mask, grid: ScanGrid, extra=None) -> ScanReport:
    vals = np.where(mask, ratio, np.nan)
    if not np.any(mask):
        raise ValueError("no grid points satisfy d0 >= d0_min")
    i_min = np.unravel_index(np.nanargmin(vals), vals.shape)
    i_max = np.unravel_index(np.nanargmax(vals), vals.shape)
    pt = lambda i: (float(R[i]), float(S[i]), float(D[i]))
    return ScanReport(
        grid.describe(),
        float(vals[i_min]),
        float(vals[i_max]),
        pt(i_min),
        pt(i_max),
        int(mask.sum()),
        extra or {},
    )


def _ratio(kind: str, n: int, m: int, R, S, D, rel_tol: float):
    """Ratio array and the points where it is defined."""
    if kind == "kernel":
        p, _ = kernel_batch(n, m, R, S, "p", rel_tol)
        return p / kernel_envelope(n, m, R, D), np.ones(R.shape, bool)
    if kind == "gradient":
        return _gradient_norm(n, m, R, S, rel_tol) / gradient_envelope(n, m, R, D), np.ones(R.shape, bool)
    p, _ = kernel_batch(n, m, R, S, "p", rel_tol)
    if kind == "crude-gradient":
        return _gradient_norm(n, m, R, S, rel_tol) / ((1 + D) * p), np.ones(R.shape, bool)
    b, _ = kernel_batch(n, m, R, S, "q2", rel_tol)
    # at z = 0 the vertical gradient vanishes; keep those points out of the minimum
    return normalization(n, m) * np.abs(b) / p, S > 0


def _scan(kind, n, m, grid, d0_min, rel_tol) -> ScanReport:
    R, S, D = grid.points()
    ratio, ok = _ratio(kind, n, m, R, S, D, rel_tol)
    extra = {"kind": kind, "n": n, "m": m, "d0_min": d0_min}
    return _report(ratio, R, S, D, ok & (D >= d0_min), grid, extra)


def scan_kernel_ratio(n: int, m: int, grid: ScanGrid = ScanGrid(), d0_min: float = 2.0, rel_tol: float = 1e-8) -> ScanReport:
    """Range of p_1 / kernel_envelope over the grid, restricted to d0 >= d0_min."""
    return _scan("kernel", n, m, grid, d0_min, rel_tol)


def scan_gradient_ratio(n: int, m: int, grid: ScanGrid = ScanGrid(), d0_min: float = 2.0, rel_tol: float = 1e-8) -> ScanReport:
    """Range of |grad p_1| / gradient_envelope over the grid."""
    return _scan("gradient", n, m, grid, d0_min, rel_tol)


def scan_crude_gradient(n: int, m: int, grid: ScanGrid = ScanGrid(), d0_min: float = 0.0, rel_tol: float = 1e-8) -> ScanReport:
    """Range of |grad p_1| / ((1 + d0) p_1); pass means the max is finite."""
    return _scan("crude-gradient", n, m, grid, d0_min, rel_tol)


def scan_vertical_gradient(n: int, m: int, grid: ScanGrid = ScanGrid(), d0_min: float = 0.0, rel_tol: float = 1e-8) -> ScanReport:
    """Range of |grad_z p_1| / p_1 = C |q2| / p_1."""
    return _scan("vertical-gradient", n, m, grid, d0_min, rel_tol)


def scan_cutoffs(kind: str, n: int, m: int, grid: ScanGrid = ScanGrid(), cutoffs=(1.0, 2.0, 4.0), rel_tol: float = 1e-8) -> dict:
    """One report per d0_min cutoff from a single evaluation of the ratio.

    The threshold beyond which the two-sided bounds hold is not known, so the
    ranges are reported for several cutoffs.  Cutoffs leaving no grid points map to None.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    R, S, D = grid.points()
    ratio, ok = _ratio(kind, n, m, R, S, D, rel_tol)
    out = {}
    for c in cutoffs:
        mask = ok & (D >= c)
        extra = {"kind": kind, "n": n, "m": m, "d0_min": float(c)}
        out[float(c)] = _report(ratio, R, S, D, mask, grid, extra) if mask.any() else None
    return out


SCANS = {
    "kernel": scan_kernel_ratio,
    "gradient": scan_gradient_ratio,
    "crude-gradient": scan_crude_gradient,
    "vertical-gradient": scan_vertical_gradient,
}


def refinement_drift(kind: str, n: int, m: int, grid: ScanGrid = ScanGrid(), **kw) -> tuple[ScanReport, ScanReport, float]:
    """Scan on grid and on its 2x refinement.

    Drift is the relative change of the max, and also of the min for the
    two-sided (kernel, gradient) comparisons.  The crude bounds are one-sided;
    their ratios tend to 0 at the grid edge, so only the max is tracked.
    """
    scan = SCANS[kind]
    a = scan(n, m, grid, **kw)
    b = scan(n, m, grid.refined(2), **kw)
    drift = abs(b.max_ratio / a.max_ratio - 1)
    if kind in ("kernel", "gradient"):
        drift = max(drift, abs(b.min_ratio / a.min_ratio - 1))
    return a, b, float(drift)
