"""H-type structures and the group law on R^{2n} x R^m.

A structure is the list of matrices J_1..J_m acting on the horizontal space
R^{2n}.  Everything else (bracket, J_z, group product) is computed from them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_SEED = 20240611
DEFAULT_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HTypeStructure:
    n: int
    m: int
    J: np.ndarray  # shape (m, 2n, 2n); J[j] is the matrix of J_{u_j}
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        J = _frozen(self.J)
        if J.shape != (self.m, 2 * self.n, 2 * self.n):
            raise ValueError(
                f"J must have shape ({self.m}, {2 * self.n}, {2 * self.n}), got {J.shape}"
            )
        if not np.all(np.isfinite(J)):
            raise ValueError("J must have finite entries")
        object.__setattr__(self, "J", J)

    @property
    def dim(self) -> int:
        return 2 * self.n + self.m

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "J": [mat.tolist() for mat in self.J]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "HTypeStructure":
        return cls(int(d["n"]), int(d["m"]), np.asarray(d["J"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "HTypeStructure":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GroupPoint:
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = _frozen(np.atleast_1d(self.x))
        z = _frozen(np.atleast_1d(self.z))
        if x.ndim != 1 or z.ndim != 1:
            raise ValueError("x and z must be vectors")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ValueError("group point entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def identity(cls, s: HTypeStructure) -> "GroupPoint":
        return cls(np.zeros(2 * s.n), np.zeros(s.m))

    def __neg__(self) -> "GroupPoint":
        return GroupPoint(-self.x, -self.z)

    @property
    def norms(self) -> tuple[float, float]:
        return float(np.linalg.norm(self.x)), float(np.linalg.norm(self.z))


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple = field(default_factory=tuple)  # (name, max deviation, tol, passed)

    @property
    def passed(self) -> bool:
        return all(c[3] for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max((c[1] for c in self.checks), default=0.0)

    def deviation(self, name: str) -> float:
        for c in self.checks:
            if c[0] == name:
                return c[1]
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"property": c[0], "max_deviation": c[1], "tol": c[2], "passed": c[3]}
                for c in self.checks
            ],
        }


# ---------------------------------------------------------------- builders

_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def build_heisenberg(n: int) -> HTypeStructure:
    """Heisenberg-Weyl structure: J e_{2i-1} = e_{2i}, J e_{2i} = -e_{2i-1}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    J = np.kron(np.eye(n), _ROT)
    return HTypeStructure(n, 1, J[None, :, :], name=f"heisenberg-{n}")


def build_complex_heisenberg() -> HTypeStructure:
    # basis order (X1, X2, Y1, Y2); column k is the image of basis vector k
    X1, X2, Y1, Y2 = np.eye(4)
    J1 = np.column_stack([Y1, -Y2, -X1, X2])
    J2 = np.column_stack([Y2, Y1, -X2, -X1])
    return HTypeStructure(2, 2, np.stack([J1, J2]), name="complex-heisenberg")


def build_anisotropic(a: Sequence[float]) -> HTypeStructure:
    """Heisenberg-like bracket [X_{2i-1}, X_{2i}] = a_i Z under the naive inner product.

    H-type only when all |a_i| = 1.
    """
    a = np.asarray(a, dtype=float)
    J = np.zeros((2 * len(a), 2 * len(a)))
    for i, ai in enumerate(a):
        J[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = ai * _ROT
    return HTypeStructure(len(a), 1, J[None], name="anisotropic")


# Tensor words over the 2x2 real matrices I, X=sigma_x, Z=sigma_z, E=rotation.
# Each word has an odd number of E factors (skew, squares to -I) and any two
# words anticommute.  Index k gives 2^k-dimensional minimal modules.
_PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
    "E": _ROT,
}
_WORDS = {
    1: ("E",),
    2: ("IE", "EX", "EZ"),
    3: ("IIE", "IEX", "XEZ", "ZEZ", "EIZ", "EXX", "EZX"),
    4: ("IIIE", "IIEX", "IXEZ", "IZEZ", "IEIZ", "IEXX", "XEZX", "ZEZX"),
}
_BASE_DIM_LOG2 = {1: 1, 2: 2, 3: 2, 4: 3, 5: 3, 6: 3, 7: 3, 8: 4}


def _word_matrix(word: str) -> np.ndarray:
    out = np.eye(1)
    for ch in word:
        out = np.kron(out, _PAULI[ch])
    return out


def clifford_generators(m: int) -> list[np.ndarray]:
    """Anticommuting real matrices squaring to -I on the minimal module for rank m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m <= 8:
        k = _BASE_DIM_LOG2[m]
        return [_word_matrix(w) for w in _WORDS[k][:m]]
    # period 8: tensor the rank m-8 module with the rank-8 module, using the
    # rank-8 volume element (symmetric, squares to +I, anticommutes with B_k)
    B = clifford_generators(8)
    omega = np.eye(16)
    for b in B:
        omega = omega @ b
    A = clifford_generators(m - 8)
    d = A[0].shape[0]
    return [np.kron(a, omega) for a in A] + [np.kron(np.eye(d), b) for b in B]


def _averaged_gram(gens: Sequence[np.ndarray]) -> np.ndarray:
    # Average of pi(h)^T pi(h) over H = {+-u_S}.  Signs drop out and the sum over
    # ordered subsets factorizes as prod_j (1 + C_j)/2 with C_j(G) = A_j^T G A_j.
    G = np.eye(gens[0].shape[0])
    for A in gens:
        G = 0.5 * (G + A.T @ G @ A)
    return 0.5 * (G + G.T)


def build_clifford(m: int, copies: int = 1, seed: int | None = DEFAULT_SEED) -> HTypeStructure:
    """H-type structure from a Clifford module, orthonormalized by group averaging.

    The minimal module is conjugated by a seeded well-conditioned matrix before
    averaging so that the averaging step does real work; pass seed=None to skip.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if copies < 1:
        raise ValueError("copies must be >= 1")
    base = clifford_generators(m)
    d = base[0].shape[0]
    gens = [np.kron(np.eye(copies), a) for a in base]
    dim = d * copies
    if seed is not None:
        rng = np.random.default_rng(seed)
        T = np.eye(dim) + 0.25 * rng.standard_normal((dim, dim)) / np.sqrt(dim)
        Tinv = np.linalg.inv(T)
        gens = [Tinv @ a @ T for a in gens]
    G = _averaged_gram(gens)
    # G = R^T R; in coordinates y = R w the averaged inner product is Euclidean
    R = np.linalg.cholesky(G).T
    Rinv = np.linalg.inv(R)
    J = np.stack([R @ a @ Rinv for a in gens])
    return HTypeStructure(dim // 2, m, J, name=f"clifford-{m}x{copies}")


PRESETS = {
    "heisenberg": lambda n=1: build_heisenberg(n),
    "complex-heisenberg": lambda n=None: build_complex_heisenberg(),
    "quaternionic": lambda n=None: build_clifford(3),
    "octonionic": lambda n=None: build_clifford(7),
}


# ---------------------------------------------------------- Hurwitz-Radon


def hurwitz_radon(k: int) -> int:
    """rho(k) = 8p + 2^q where k = a 2^{4p+q}, a odd, 0 <= q <= 3."""
    k = int(k)
    if k < 1:
        raise ValueError("hurwitz_radon requires k >= 1")
    e = 0
    while k % 2 == 0:
        k //= 2
        e += 1
    p, q = divmod(e, 4)
    return 8 * p + 2**q


def exists_htype(two_n: int, m: int) -> bool:
    two_n, m = int(two_n), int(m)
    if two_n < 1 or two_n % 2:
        raise ValueError("horizontal dimension two_n must be even and positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    return m < hurwitz_radon(two_n)


# ----------------------------------------------------------- group law


def _check_x(s: HTypeStructure, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2 * s.n:
        raise ValueError(f"horizontal vector must have length {2 * s.n}, got {x.shape[-1]}")
    return x


def _check_z(s: HTypeStructure, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != s.m:
        raise ValueError(f"central vector must have length {s.m}, got {z.shape[-1]}")
    return z


def bracket(s: HTypeStructure, x, y) -> np.ndarray:
    """Component j is <J_j x, y>.  Broadcasts over leading axes."""
    x = _check_x(s, x)
    y = _check_x(s, y)
    return np.einsum("jab,...b,...a->...j", s.J, x, y)


def j_apply(s: HTypeStructure, z, x) -> np.ndarray:
    """J_z x = sum_j z_j J_j x.  Broadcasts over leading axes."""
    z = _check_z(s, z)
    x = _check_x(s, x)
    return np.einsum("...j,jab,...b->...a", z, s.J, x)


def j_matrix(s: HTypeStructure, z) -> np.ndarray:
    z = _check_z(s, z)
    return np.einsum("j,jab->ab", z, s.J)


def group_mul(s: HTypeStructure, g: GroupPoint, h: GroupPoint) -> GroupPoint:
    _check_x(s, g.x), _check_x(s, h.x), _check_z(s, g.z), _check_z(s, h.z)
    return GroupPoint(g.x + h.x, g.z + h.z + 0.5 * bracket(s, g.x, h.x))


def group_inv(g: GroupPoint) -> GroupPoint:
    return -g


def dilate(alpha: float, g: GroupPoint) -> GroupPoint:
    if not alpha > 0:
        raise ValueError("dilation factor alpha must be positive")
    return GroupPoint(alpha * g.x, alpha * alpha * g.z)


# ----------------------------------------------------------- verification


def _unit_rows(rng: np.random.Generator, k: int, d: int) -> np.ndarray:
    v = rng.standard_normal((k, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def verify_htype(
    s: HTypeStructure, tol: float = DEFAULT_TOL, samples: int = 128, seed: int = DEFAULT_SEED
) -> VerificationReport:
    """Check the H-type identities on basis pairs and seeded random unit samples.

    Deviations are measured on unit vectors, so they are relative to |z||x|.
    Failures are reported, never raised.
    """
    if samples < 100:
        raise ValueError("at least 100 random samples are required")
    rng = np.random.default_rng(seed)
    J = s.J
    d2n, m = 2 * s.n, s.m
    I = np.eye(d2n)

    # random unit samples, with the basis vectors appended
    Z = np.vstack([np.eye(m), _unit_rows(rng, samples, m)])
    W = np.vstack([np.eye(m)[::-1], _unit_rows(rng, samples, m)])
    X = _unit_rows(rng, len(Z), d2n)
    X[: min(d2n, len(Z))] = I[: min(d2n, len(Z))]
    Y = _unit_rows(rng, len(Z), d2n)

    JZ = np.einsum("kj,jab->kab", Z, J)
    JW = np.einsum("kj,jab->kab", W, J)

    skew = float(np.max(np.abs(J + np.transpose(J, (0, 2, 1)))))
    zz = np.sum(Z * Z, axis=1)
    sq = np.einsum("kab,kbc->kac", JZ, JZ) + zz[:, None, None] * I
    square = float(np.max(np.abs(sq)))
    cl = np.einsum("jab,kbc->jkac", J, J) + np.einsum("kab,jbc->jkac", J, J)
    cl += 2.0 * np.eye(m)[:, :, None, None] * I
    clifford = float(np.max(np.abs(cl)))

    JZx = np.einsum("kab,kb->ka", JZ, X)
    JWx = np.einsum("kab,kb->ka", JW, X)
    JZy = np.einsum("kab,kb->ka", JZ, Y)
    xx = np.sum(X * X, axis=1)
    item6 = np.abs(np.sum(JZx * JWx, axis=1) - np.sum(Z * W, axis=1) * xx)
    item7 = np.abs(np.sum(JZx * JZy, axis=1) - np.sum(X * Y, axis=1) * zz)
    br = np.einsum("jab,kb,ka->kj", J, X, JZx)
    item8 = np.abs(br - xx[:, None] * Z)

    checks = []
    for name, dev in [
        ("skew-adjoint", skew),
        ("J_z^2 = -|z|^2 I", square),
        ("Clifford relation", clifford),
        ("<J_z x, J_w x> = <z,w>|x|^2", float(item6.max())),
        ("<J_z x, J_z y> = <x,y>|z|^2", float(item7.max())),
        ("[x, J_z x] = |x|^2 z", float(item8.max())),
    ]:
        checks.append((name, dev, tol, bool(dev <= tol)))
    return VerificationReport(tuple(checks))
