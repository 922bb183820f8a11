"""Small symmetric matrices and the elliptic operator kernel.

Everything downstream evaluates operators F through this module.  The sign
convention is fixed once and for all: F(M) = -trace(M) for the Laplacian,
so "u is a supersolution of F(D^2 u) = f" means F(D^2 u) >= f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 8

LAPLACIAN = "laplacian"
PUCCI_MAX = "pucci_max"
PUCCI_MIN = "pucci_min"
ISAACS = "isaacs"

_KINDS = (LAPLACIAN, PUCCI_MAX, PUCCI_MIN, ISAACS)


class DimensionMismatch(ValueError):
    pass


class InvalidOperator(ValueError):
    pass


def _packed_size(dim):
    return dim * (dim + 1) // 2


@dataclass(frozen=True)
class SymMatrix:
    """Dense symmetric matrix, packed upper triangle (row-major).

    Immutable; dim <= 8 by construction (desk-scale guard).
    """

    dim: int
    entries: tuple

    def __post_init__(self):
        if not (1 <= self.dim <= MAX_DIM):
            raise ValueError(f"dim must be in [1, {MAX_DIM}], got {self.dim}")
        ent = tuple(float(v) for v in self.entries)
        if len(ent) != _packed_size(self.dim):
            raise ValueError(
                f"expected {_packed_size(self.dim)} packed entries for dim "
                f"{self.dim}, got {len(ent)}"
            )
        if not all(math.isfinite(v) for v in ent):
            raise ValueError("entries must be finite")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def from_dense(cls, a) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("from_dense needs a square array")
        if not np.allclose(a, a.T, atol=1e-12 * (1 + np.abs(a).max())):
            raise ValueError("matrix is not symmetric")
        n = a.shape[0]
        sym = 0.5 * (a + a.T)
        packed = [sym[i, j] for i in range(n) for j in range(i, n)]
        return cls(n, tuple(packed))

    @classmethod
    def diag(cls, *values) -> "SymMatrix":
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, dim) -> "SymMatrix":
        return cls.from_dense(np.eye(dim))

    @classmethod
    def zero(cls, dim) -> "SymMatrix":
        return cls.from_dense(np.zeros((dim, dim)))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dim, self.dim))
        k = 0
        for i in range(self.dim):
            for j in range(i, self.dim):
                a[i, j] = self.entries[k]
                a[j, i] = self.entries[k]
                k += 1
        return a

    def trace(self) -> float:
        a = self.to_dense()
        return float(np.trace(a))

    def __add__(self, other):
        self._check_dim(other)
        return SymMatrix.from_dense(self.to_dense() + other.to_dense())

    def __sub__(self, other):
        self._check_dim(other)
        return SymMatrix.from_dense(self.to_dense() - other.to_dense())

    def __mul__(self, t):
        return SymMatrix.from_dense(float(t) * self.to_dense())

    __rmul__ = __mul__

    def __neg__(self):
        return SymMatrix.from_dense(-self.to_dense())

    def _check_dim(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch(f"dim {self.dim} vs {other.dim}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_dense()))


def eigenvalues_sym(m: SymMatrix) -> list:
    """Ascending eigenvalues via cyclic Jacobi rotations.

    Dependency-free on purpose: matrices here never exceed 8x8, and the
    rotation method is exact enough that A = V diag(w) V^T reconstructs to
    ~1e-15 relative.
    """
    a = m.to_dense()
    n = a.shape[0]
    if n == 1:
        return [float(a[0, 0])]
    scale = 1.0 + np.abs(a).max()
    for _ in range(100):  # sweeps; quadratic convergence, ~6 needed
        off = math.sqrt(max(0.0, (a * a).sum() - (np.diag(a) ** 2).sum()))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.hypot(1.0, theta)
                )
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a = 0.5 * (a + a.T)
    return sorted(float(v) for v in np.diag(a))


@dataclass(frozen=True)
class EllipticOperator:
    """Positively homogeneous uniformly elliptic operator.

    Built-in kinds: laplacian, pucci_max, pucci_min; or a finite sup-inf
    (Isaacs) family of control matrices A with lam*I <= A <= Lam*I.
    ``families`` is a list over the sup index of lists over the inf index.
    """

    dim: int
    kind: str
    lam: float = 1.0
    Lam: float = 1.0
    families: tuple = ()
    rot_invariant: bool = True
    _rot_checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidOperator(f"unknown kind {self.kind!r}")
        if not (1 <= self.dim <= MAX_DIM):
            raise InvalidOperator(f"dim must be in [1, {MAX_DIM}]")
        if self.kind == LAPLACIAN:
            object.__setattr__(self, "lam", 1.0)
            object.__setattr__(self, "Lam", 1.0)
            object.__setattr__(self, "rot_invariant", True)
        if not (0.0 < self.lam <= self.Lam):
            raise InvalidOperator(
                f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})"
            )
        if self.kind in (PUCCI_MAX, PUCCI_MIN):
            object.__setattr__(self, "rot_invariant", True)
        if self.kind == ISAACS:
            if not self.families:
                raise InvalidOperator("isaacs kind needs a nonempty family")
            fams = tuple(tuple(row) for row in self.families)
            for i, row in enumerate(fams):
                if not row:
                    raise InvalidOperator(f"sup family {i} is empty")
                for j, a in enumerate(row):
                    if not isinstance(a, SymMatrix):
                        raise InvalidOperator("control matrices must be SymMatrix")
                    if a.dim != self.dim:
                        raise InvalidOperator(
                            f"control matrix ({i},{j}) has dim {a.dim}, "
                            f"operator dim {self.dim}"
                        )
                    ev = eigenvalues_sym(a)
                    if ev[0] < self.lam - 1e-12 or ev[-1] > self.Lam + 1e-12:
                        raise InvalidOperator(
                            f"control matrix ({i},{j}) has eigenvalues "
                            f"[{ev[0]:.6g}, {ev[-1]:.6g}] outside "
                            f"[{self.lam}, {self.Lam}]"
                        )
            object.__setattr__(self, "families", fams)
            if self.rot_invariant and not self._rot_checked:
                object.__setattr__(self, "_rot_checked", True)
                if not self._sample_rotation_invariance():
                    # downgrade the claim rather than erroring out
                    object.__setattr__(self, "rot_invariant", False)
        elif self.families:
            raise InvalidOperator("families only valid for isaacs kind")

    def _sample_rotation_invariance(self, samples=64, seed=0):
        rng = np.random.default_rng(seed)
        n = self.dim
        for _ in range(samples):
            m = rng.standard_normal((n, n))
            m = SymMatrix.from_dense(0.5 * (m + m.T))
            q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            mr = SymMatrix.from_dense(q @ m.to_dense() @ q.T)
            a, b = eval_operator(self, m), eval_operator(self, mr)
            if abs(a - b) > 1e-8 * (1.0 + abs(a)):
                return False
        return True


def laplacian(dim) -> EllipticOperator:
    return EllipticOperator(dim=dim, kind=LAPLACIAN)


def pucci_max(lam, Lam, dim) -> EllipticOperator:
    return EllipticOperator(dim=dim, kind=PUCCI_MAX, lam=lam, Lam=Lam)


def pucci_min(lam, Lam, dim) -> EllipticOperator:
    return EllipticOperator(dim=dim, kind=PUCCI_MIN, lam=lam, Lam=Lam)


def isaacs(lam, Lam, dim, families, rot_invariant=False) -> EllipticOperator:
    fams = tuple(
        tuple(a if isinstance(a, SymMatrix) else SymMatrix.from_dense(a) for a in row)
        for row in families
    )
    return EllipticOperator(
        dim=dim, kind=ISAACS, lam=lam, Lam=Lam, families=fams,
        rot_invariant=rot_invariant,
    )


def pucci_max_value(lam, Lam, eigs) -> float:
    return float(-lam * sum(e for e in eigs if e > 0) - Lam * sum(e for e in eigs if e < 0))


def pucci_min_value(lam, Lam, eigs) -> float:
    return float(-Lam * sum(e for e in eigs if e > 0) - lam * sum(e for e in eigs if e < 0))


def eval_operator(f: EllipticOperator, m: SymMatrix) -> float:
    """Evaluate F(M).

    laplacian -> -tr(M); pucci kinds -> weighted eigenvalue sums; isaacs ->
    max over sup families of min over the family of -tr(A M).
    """
    if f.dim != m.dim:
        raise DimensionMismatch(f"operator dim {f.dim}, matrix dim {m.dim}")
    if f.kind == LAPLACIAN:
        return -m.trace()
    if f.kind in (PUCCI_MAX, PUCCI_MIN):
        eigs = eigenvalues_sym(m)
        if f.kind == PUCCI_MAX:
            return pucci_max_value(f.lam, f.Lam, eigs)
        return pucci_min_value(f.lam, f.Lam, eigs)
    md = m.to_dense()
    return max(
        min(-float(np.tensordot(a.to_dense(), md)) for a in row)
        for row in f.families
    )


def radial_hessian(n: int, g1: float, g2: float, r: float) -> SymMatrix:
    """Hessian of x -> g(|x|) in the frame with first axis radial.

    Eigenvalues: g'' once and g'/r with multiplicity n - 1.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    vals = [g2] + [g1 / r] * (n - 1)
    return SymMatrix.diag(*vals)


def hessian_xi(beta: float, z, n: int) -> SymMatrix:
    """Ambient Hessian of |x|^{-beta} at z != 0.

    Closed form beta(beta+2)|z|^{-beta-4} z (x) z - beta |z|^{-beta-2} I;
    spectrum matches radial_hessian of r^{-beta} at r = |z|.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (n,):
        raise ValueError(f"z must be a length-{n} vector")
    r = float(np.linalg.norm(z))
    if r == 0.0:
        raise ValueError("z must be nonzero")
    a = beta * (beta + 2.0) * r ** (-beta - 4.0) * np.outer(z, z)
    a -= beta * r ** (-beta - 2.0) * np.eye(n)
    return SymMatrix.from_dense(a)


def _random_sym(rng, n, scale=2.0):
    a = rng.standard_normal((n, n)) * scale
    return SymMatrix.from_dense(0.5 * (a + a.T))


def _random_psd(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return SymMatrix.from_dense(a @ a.T / n)


@dataclass
class EllipticityReport:
    samples: int
    violations: list
    lam: float
    Lam: float

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_ellipticity(f: EllipticOperator, samples: int, seed: int) -> EllipticityReport:
    """Sample-check (H1)-(H2) and the Pucci sandwich.

    Violations are collected with their witnesses; they are report content,
    not exceptions.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = f.dim
    violations = []
    for k in range(samples):
        m = _random_sym(rng, n)
        nn = _random_psd(rng, n)
        fm = eval_operator(f, m)
        fmn = eval_operator(f, m - nn)
        trn = nn.trace()
        lo, hi = f.lam * trn, f.Lam * trn
        slack = 1e-9 * (1.0 + abs(fm) + trn)
        if not (lo - slack <= fmn - fm <= hi + slack):
            violations.append(("H1", k, m, nn, fmn - fm, (lo, hi)))
        t = float(rng.uniform(0.0, 4.0))
        ftm = eval_operator(f, t * m)
        if abs(ftm - t * fm) > 1e-10 * (1.0 + abs(t * fm)):
            violations.append(("H2", k, m, t, ftm, t * fm))
        eigs = eigenvalues_sym(m)
        pmin = pucci_min_value(f.lam, f.Lam, eigs)
        pmax = pucci_max_value(f.lam, f.Lam, eigs)
        if not (pmin - slack <= fm <= pmax + slack):
            violations.append(("sandwich", k, m, fm, (pmin, pmax)))
    return EllipticityReport(samples=samples, violations=violations,
                             lam=f.lam, Lam=f.Lam)
