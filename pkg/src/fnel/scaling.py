"""Scaling exponents, critical exponents, and existence/nonexistence verdicts.

The analytic path only applies to rotationally invariant operators: there the
fundamental solution is radial and its homogeneity degree is the root of a
one-dimensional strictly decreasing indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .matcore import EllipticOperator, SymMatrix, eval_operator

LOG_CASE_THRESHOLD = 1e-9
DEFAULT_ALPHA_TOL = 1e-12

NONEXISTENCE_EXTERIOR = "NONEXISTENCE_EXTERIOR"
EXISTENCE_SUPERSOLUTION = "EXISTENCE_SUPERSOLUTION"


class NotRotInvariant(ValueError):
    pass


class OperatorInvalid(ValueError):
    """Indicator has no sign change on the admissible bracket."""


def xi_alpha(alpha: float, r: float) -> float:
    """Radial profile r^{-a} / -log r / -r^{-a} for a >, =, < 0."""
    if r <= 0:
        raise ValueError("r must be positive")
    if alpha > 0:
        return r ** (-alpha)
    if alpha == 0:
        return -math.log(r)
    return -(r ** (-alpha))


def alpha_bracket(f: EllipticOperator, n: int) -> tuple:
    """Admissible range of the scaling exponent for ellipticity (lam, Lam)."""
    return ((f.lam / f.Lam) * (n - 1) - 1.0, (f.Lam / f.lam) * (n - 1) - 1.0)


def homogeneity_indicator(f: EllipticOperator, n: int, alpha: float) -> float:
    """Normalized radial residual psi(a) = F(diag(a+1, -1, ..., -1)).

    sign(psi(a)) = sign(F(D^2 xi_a)) for every r > 0, and psi is strictly
    decreasing in a, so its unique root is the scaling exponent.
    """
    if not f.rot_invariant:
        raise NotRotInvariant("indicator requires a rotationally invariant operator")
    if n != f.dim:
        raise ValueError(f"n={n} does not match operator dim {f.dim}")
    pattern = SymMatrix.diag(alpha + 1.0, *([-1.0] * (n - 1)))
    return eval_operator(f, pattern)


@dataclass(frozen=True)
class ScalingReport:
    alpha_star: float
    log_case: bool
    bracket: tuple
    indicator_samples: tuple
    critical_exponent: float  # math.inf when alpha_star <= 0

    def __post_init__(self):
        lo, hi = self.bracket
        if not (lo - 1e-9 <= self.alpha_star <= hi + 1e-9):
            raise ValueError("alpha_star outside the admissible bracket")
        if self.alpha_star <= -1.0:
            raise ValueError("alpha_star must exceed -1")


def alpha_star(f: EllipticOperator, n: int, tol: float = DEFAULT_ALPHA_TOL) -> ScalingReport:
    """Scaling exponent of F in dimension n, by bisection on the indicator."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = alpha_bracket(f, n)
    scale = max(f.lam, 1.0)
    psi_lo = homogeneity_indicator(f, n, lo)
    psi_hi = homogeneity_indicator(f, n, hi)
    if lo == hi:
        root = lo
    elif abs(psi_lo) <= tol * scale:
        root = lo
    elif abs(psi_hi) <= tol * scale:
        root = hi
    elif psi_lo < 0 or psi_hi > 0:
        raise OperatorInvalid(
            f"indicator has no sign change on [{lo}, {hi}]: "
            f"psi(lo)={psi_lo:.6g}, psi(hi)={psi_hi:.6g}"
        )
    else:
        a, b = lo, hi
        while b - a > tol:
            mid = 0.5 * (a + b)
            if homogeneity_indicator(f, n, mid) > 0:
                a = mid
            else:
                b = mid
        root = 0.5 * (a + b)
    log_case = abs(root) < LOG_CASE_THRESHOLD
    if log_case:
        root = 0.0
    samples = tuple(
        (float(a), homogeneity_indicator(f, n, float(a)))
        for a in np.linspace(lo, hi, 9)
    )
    crit = (root + 2.0) / root if root > 0 else math.inf
    return ScalingReport(
        alpha_star=root, log_case=log_case, bracket=(lo, hi),
        indicator_samples=samples, critical_exponent=crit,
    )


def critical_exponent(f: EllipticOperator, n: int) -> float:
    """(a*+2)/a* when a* > 0, else +inf."""
    return alpha_star(f, n).critical_exponent


def beta_star(p: float, gamma: float = 0.0) -> float:
    """Scaling exponent (2 - gamma)/(p - 1) of F(D^2 u) = |x|^{-gamma} u^p."""
    if p <= 1:
        raise ValueError("p must exceed 1 (standing assumption p > 1)")
    if gamma >= 2:
        raise ValueError("gamma must be below 2 (standing assumption gamma < 2)")
    return (2.0 - gamma) / (p - 1.0)


def K_coefficient(f: EllipticOperator, n: int, beta: float) -> float:
    """Constant K with F(D^2(r^{-beta})) = K r^{-beta-2}.

    Positive exactly when beta < alpha_star, zero at beta = alpha_star.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    pattern = SymMatrix.diag(beta * (beta + 1.0), *([-beta] * (n - 1)))
    return eval_operator(f, pattern)


def explicit_constant(f: EllipticOperator, n: int, p: float, gamma: float = 0.0) -> Optional[float]:
    """Constant c making u = c r^{-beta*} an exact solution of F(D^2u) = |x|^{-gamma} u^p.

    Returns None when K <= 0, i.e. in the nonexistence regime.
    """
    b = beta_star(p, gamma)
    if not f.rot_invariant:
        raise NotRotInvariant("explicit constants need a rotationally invariant operator")
    k = K_coefficient(f, n, b)
    if k <= 0:
        return None
    return k ** (1.0 / (p - 1.0))


@dataclass(frozen=True)
class Verdict:
    alpha_star: float
    beta_star: float
    outcome: str
    theorem_cited: str

    def __post_init__(self):
        want = NONEXISTENCE_EXTERIOR if self.alpha_star <= self.beta_star \
            else EXISTENCE_SUPERSOLUTION
        if self.outcome != want:
            raise ValueError("outcome inconsistent with exponent comparison")

    @property
    def margin(self) -> float:
        return self.alpha_star - self.beta_star


def classify(f: EllipticOperator, n: int, p: float, gamma: float = 0.0,
             alpha: Optional[float] = None) -> Verdict:
    """Existence/nonexistence dichotomy for F(D^2 u) = |x|^{-gamma} u^p.

    The comparison alpha* <= beta* is closed: equality classifies as
    nonexistence, with no tolerance band.
    """
    b = beta_star(p, gamma)
    a = alpha if alpha is not None else alpha_star(f, n).alpha_star
    if a <= b:
        return Verdict(a, b, NONEXISTENCE_EXTERIOR,
                       "no nontrivial nonnegative supersolution in any exterior domain")
    return Verdict(a, b, EXISTENCE_SUPERSOLUTION,
                   "positive supersolution exists (whole space when gamma <= 0)")


@dataclass(frozen=True)
class NonlinearitySpec:
    """A nonlinearity f(x, s) = f(|x|, s), given as an evaluator.

    ``power(c, gamma, p)`` builds the reference family c |x|^{-gamma} s^p.
    """

    evaluator: Callable[[float, float], float]
    epsilon0: float = 1.0
    R0: float = 1.0
    label: str = "sampled"

    def __post_init__(self):
        if self.epsilon0 <= 0 or self.R0 <= 0:
            raise ValueError("epsilon0 and R0 must be positive")

    @classmethod
    def power(cls, c: float, gamma: float, p: float, epsilon0: float = 1.0,
              R0: float = 1.0) -> "NonlinearitySpec":
        if c <= 0 or p <= 1 or gamma >= 2:
            raise ValueError("power form needs c > 0, p > 1, gamma < 2")
        return cls(
            evaluator=lambda r, s: c * r ** (-gamma) * s ** p,
            epsilon0=epsilon0, R0=R0,
            label=f"{c}*|x|^(-{gamma})*s^{p}",
        )


@dataclass(frozen=True)
class SamplingPlan:
    R_max: float = 100.0
    T_max: float = 10.0
    num_x: int = 24
    num_s: int = 48

    def radii(self, R0):
        return np.geomspace(R0, self.R_max, self.num_x)

    def s_values(self, eps0):
        return np.geomspace(1e-6 * eps0, eps0, self.num_s)

    def t_values(self):
        return np.geomspace(1e-6 * self.T_max, self.T_max, self.num_s)


@dataclass
class ConditionReport:
    name: str
    fitted_constant: float
    passed: bool
    witness: tuple  # sample point realizing the fitted constant


@dataclass
class HypothesisReport:
    conditions: list
    wording: str = "sampled evidence, not certified"

    def condition(self, name):
        return next(c for c in self.conditions if c.name == name)

    @property
    def all_passed(self):
        return all(c.passed for c in self.conditions)


def _trend_diverges(values_by_scale):
    """True when the running sup keeps growing as the scale shrinks."""
    sups = [max(v) for v in values_by_scale if v]
    if len(sups) < 2:
        return False
    return sups[0] > 10.0 * sups[-1]


def hypothesis_check(spec: NonlinearitySpec, p: float, gamma: float,
                     grid: SamplingPlan = SamplingPlan()) -> HypothesisReport:
    """Sample the three structural conditions on f against |x|^{-gamma} s^p.

    A sampler, never a certifier: the underlying conditions quantify over
    continua, so PASS means "no violation found on the plan's grid".
    """
    radii = grid.radii(spec.R0)
    svals = grid.s_values(spec.epsilon0)
    tvals = grid.t_values()
    f = spec.evaluator

    # lower bound f >= c0 |x|^{-gamma} s^p on small s
    lower_vals, lower_wit = [], None
    for r in radii:
        for s in svals:
            q = f(r, s) * r ** gamma / s ** p
            if lower_wit is None or q < lower_wit[0]:
                lower_wit = (q, r, s)
            lower_vals.append(q)
    c0 = min(lower_vals)
    cond1 = ConditionReport("fx-nonexist1", c0, c0 > 1e-12,
                            (lower_wit[1], lower_wit[2]))

    # monotone ratio f(x,s)/s <= C0 f(x,t)/t for s <= min(t, eps0)
    ratio_by_decade = []
    ratio_wit = (0.0, None, None, None)
    decades = np.array_split(svals, 6)  # smallest s first
    for block in decades:
        block_vals = []
        for r in radii[:: max(1, len(radii) // 6)]:
            for s in block:
                for t in list(tvals[:: max(1, len(tvals) // 8)]) + [s]:
                    if s > min(t, spec.epsilon0):
                        continue
                    q = (f(r, s) / s) / (f(r, t) / t)
                    block_vals.append(q)
                    if q > ratio_wit[0]:
                        ratio_wit = (q, r, s, t)
        ratio_by_decade.append(block_vals)
    C0_ratio = ratio_wit[0]
    cond2 = ConditionReport("fx-nonexist2", C0_ratio,
                            not _trend_diverges(ratio_by_decade),
                            ratio_wit[1:])

    # upper bound f <= C0 |x|^{-gamma} s^p on small s
    upper_by_decade, upper_wit = [], (0.0, None, None)
    for block in decades:
        block_vals = []
        for r in radii:
            for s in block:
                q = f(r, s) * r ** gamma / s ** p
                block_vals.append(q)
                if q > upper_wit[0]:
                    upper_wit = (q, r, s)
        upper_by_decade.append(block_vals)
    cond3 = ConditionReport("fx-exist", upper_wit[0],
                            not _trend_diverges(upper_by_decade),
                            upper_wit[1:])

    return HypothesisReport(conditions=[cond1, cond2, cond3])


def sampled_verdict(f_op: EllipticOperator, n: int, spec: NonlinearitySpec,
                    p: float, gamma: float,
                    grid: SamplingPlan = SamplingPlan()) -> dict:
    """Combine the exponent comparison with the sampled structural checks."""
    verdict = classify(f_op, n, p, gamma)
    report = hypothesis_check(spec, p, gamma, grid)
    if verdict.outcome == NONEXISTENCE_EXTERIOR:
        needed = ["fx-nonexist1", "fx-nonexist2"]
    else:
        needed = ["fx-exist"]
    supported = all(report.condition(name).passed for name in needed)
    return {
        "outcome": verdict.outcome,
        "alpha_star": verdict.alpha_star,
        "beta_star": verdict.beta_star,
        "conditions_required": needed,
        "supported": supported,
        "wording": "sampled evidence, not certified",
        "report": report,
    }
