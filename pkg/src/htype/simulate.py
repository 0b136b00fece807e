"""Horizontal Brownian motion on an H-type group.

The generator is L = sum X_i^2 (no factor 1/2), so each horizontal coordinate
gets variance 2 dt per step.  The central increment is the Levy-area rule
dz = [x, dx] / 2; because bracket(dx, dx) = 0 the left-point and midpoint
rules give the same increment.

Paths are generated in fixed blocks of BLOCK paths.  Block b draws from its own
Philox stream keyed by (seed, b), so the output depends only on the config and
not on the thread schedule.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .algebra import GroupPoint, HTypeStructure
from .estimates import ScanReport
from .heatkernel import KernelQuery, pt

BLOCK = 4096
STEP_CHUNK = 128  # bounds memory to STEP_CHUNK * BLOCK * 2n doubles


def thread_count() -> int:
    env = os.environ.get("HTYPE_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


@dataclass(frozen=True)
class SimConfig:
    structure: HTypeStructure
    t: float = 1.0
    steps: int = 1000
    n_paths: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SampleBatch:
    x: np.ndarray  # (n_paths, 2n)
    z: np.ndarray  # (n_paths, m)
    t: float
    steps: int
    seed: int

    def __len__(self) -> int:
        return self.x.shape[0]

    def __getitem__(self, i: int) -> GroupPoint:
        return GroupPoint(self.x[i], self.z[i])

    def radial(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.norm(self.x, axis=1), np.linalg.norm(self.z, axis=1)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _run_block(s: HTypeStructure, cfg: SimConfig, block: int, size: int):
    rng = _block_rng(cfg.seed, block)
    dt = cfg.t / cfg.steps
    sd = math.sqrt(2.0 * dt)
    x = np.zeros((size, 2 * s.n))
    z = np.zeros((size, s.m))
    done = 0
    while done < cfg.steps:
        k = min(STEP_CHUNK, cfg.steps - done)
        dx = rng.standard_normal((size, k, 2 * s.n))
        dx *= sd
        xs = np.cumsum(dx, axis=1)
        x_end = x + xs[:, -1]
        xs -= dx
        xs += x[:, None, :]  # left endpoints
        # sum_k <J_j x_k, dx_k> = sum_ab J_jab (sum_k dx_k,a x_k,b)
        outer = np.matmul(dx.transpose(0, 2, 1), xs)
        z += 0.5 * np.einsum("jab,pab->pj", s.J, outer)
        x = x_end
        done += k
    return x, z


def simulate(cfg: SimConfig) -> SampleBatch:
    s = cfg.structure
    sizes = [min(BLOCK, cfg.n_paths - b * BLOCK) for b in range(math.ceil(cfg.n_paths / BLOCK))]
    work = lambda b: _run_block(s, cfg, b, sizes[b])
    threads = min(thread_count(), len(sizes))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(b) for b in range(len(sizes))]
    x = np.concatenate([p[0] for p in parts])
    z = np.concatenate([p[1] for p in parts])
    return SampleBatch(x, z, cfg.t, cfg.steps, cfg.seed)


def mc_mean(values) -> tuple[complex | float, float]:
    """Sample mean and its standard error (complex values use E|v - mean|^2)."""
    v = np.asarray(values)
    mean = v.mean()
    err = math.sqrt(float(np.mean(np.abs(v - mean) ** 2)) / max(1, v.size - 1))
    return mean, err


def char_z(batch: SampleBatch, lam, with_error: bool = False):
    """Empirical E exp(i <lam, z_T>); the exact law gives cosh(t |lam|)^{-n}."""
    lam = np.asarray(lam, dtype=float)
    mean, err = mc_mean(np.exp(1j * batch.z @ lam))
    return (complex(mean), err) if with_error else complex(mean)


def char_z_exact(n: int, t: float, lam) -> float:
    return math.cosh(t * float(np.linalg.norm(lam))) ** (-n)


def poly_expectation(batch: SampleBatch, p) -> tuple[float, float]:
    """Empirical E p(x_T, z_T) and its standard error."""
    mean, err = mc_mean(p.evaluate_many(batch.x, batch.z))
    return float(mean), err


def kde_compare(batch: SampleBatch, s: HTypeStructure, grid, bandwidth: float, rel_tol: float = 1e-8) -> ScanReport:
    """Gaussian kernel density estimate of p_t at points (|x|, |z|) versus the evaluator.

    Ratios are estimate / p_t; extra holds the largest deviation measured in MC
    standard errors.  The kernel smoothing bias (order bandwidth^2) is not
    corrected, so this is a diagnostic.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    dim = 2 * s.n + s.m
    if dim > 5:
        raise ValueError("density estimates need 2n + m <= 5")
    h2 = bandwidth * bandwidth
    norm = (2 * math.pi * h2) ** (-dim / 2)
    ratios, zscores, rows = [], [], []
    for r, sz in grid:
        gx = np.zeros(2 * s.n)
        gx[0] = r
        gz = np.zeros(s.m)
        gz[0] = sz
        d2 = np.sum((batch.x - gx) ** 2, axis=1) + np.sum((batch.z - gz) ** 2, axis=1)
        est, err = mc_mean(norm * np.exp(-0.5 * d2 / h2))
        ref = pt(KernelQuery(s.n, s.m, batch.t, float(r), float(sz), rel_tol)).value
        ratios.append(est / ref)
        zscores.append(abs(est - ref) / err if err > 0 else math.inf)
        rows.append((float(r), float(sz), float(est), float(ref), float(err)))
    ratios = np.asarray(ratios)
    i, j = int(np.argmin(ratios)), int(np.argmax(ratios))
    return ScanReport(
        {"points": [list(map(float, g)) for g in grid], "bandwidth": bandwidth},
        float(ratios[i]),
        float(ratios[j]),
        rows[i][:2],
        rows[j][:2],
        len(rows),
        {"max_z_score": float(max(zscores)), "rows": rows},
    )
