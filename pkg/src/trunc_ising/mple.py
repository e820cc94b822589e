"""Maximum pseudolikelihood estimation of the inverse temperature.

The negative log-pseudolikelihood of beta given one sample sigma is

    objective(beta) = sum over flippable i of
        log(exp(-beta m_i) + exp(beta m_i)) - beta m_i sigma_i

with derivative sum m_i (tanh(beta m_i) - sigma_i) and second derivative
sum m_i^2 / cosh^2(beta m_i) >= 0, so the objective is convex. Unflippable
coordinates carry no information (their conditional law is a point mass) and
are excluded. The estimator runs projected gradient descent on
objective/n over [-B, B] with unit step size, which is valid because the
normalized gradient is 1-Lipschitz in beta under |m_i| <= 1.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import cnf as _cnf
from . import graph as _graph
from .errors import DegenerateObjectiveError, SampleNotInSupportError
from .model import TruncatedIsingModel, enumerate_exact, energy

_BETA_SLACK = 1e-12  # tolerate clamp/minimizer endpoints to fp rounding


@dataclass
class PseudolikelihoodContext:
    """Everything the objective needs: magnetizations, spins, flippable mask, B."""

    magnetizations: np.ndarray  # float64, length n
    spins: np.ndarray  # int8, length n
    flippable: np.ndarray  # bool, length n
    B: float

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("B must be positive")
        if np.abs(self.magnetizations).max(initial=0.0) > 1.0 + 1e-9:
            raise ValueError("magnetizations must lie in [-1, 1]")
        # restrictions of the arrays to the flippable coordinates
        self._m = self.magnetizations[self.flippable].astype(np.float64)
        self._s = self.spins[self.flippable].astype(np.float64)

    @property
    def n(self) -> int:
        return int(self.spins.shape[0])

    @property
    def flippable_count(self) -> int:
        return int(self.flippable.sum())

    @classmethod
    def from_sample(
        cls, model: TruncatedIsingModel, sample, B: Optional[float] = None
    ) -> "PseudolikelihoodContext":
        spins = _cnf.as_spin_vector(sample, model.n)
        if not _cnf.satisfies(model.formula, spins):
            raise SampleNotInSupportError("sample does not satisfy the formula")
        return cls(
            magnetizations=_graph.all_magnetizations(model.graph, spins),
            spins=spins,
            flippable=_cnf.flippable_mask(model.formula, spins),
            B=model.beta_bound if B is None else float(B),
        )

    def check_beta(self, beta: float) -> float:
        beta = float(beta)
        if abs(beta) > self.B + _BETA_SLACK:
            raise ValueError(f"|beta| = {abs(beta)} exceeds the bound B = {self.B}")
        return beta


def objective(ctx: PseudolikelihoodContext, beta: float) -> float:
    """Negative log-pseudolikelihood (log(2 cosh) evaluated in stable form)."""
    beta = ctx.check_beta(beta)
    x = beta * ctx._m
    ax = np.abs(x)
    return float(np.sum(ax + np.log1p(np.exp(-2.0 * ax)) - x * ctx._s))


def gradient(ctx: PseudolikelihoodContext, beta: float) -> float:
    """d objective / d beta = sum over flippable of m_i (tanh(beta m_i) - sigma_i)."""
    beta = ctx.check_beta(beta)
    return float(np.sum(ctx._m * (np.tanh(beta * ctx._m) - ctx._s)))


def curvature(ctx: PseudolikelihoodContext, beta: float) -> float:
    """d^2 objective / d beta^2 = sum m_i^2 sech^2(beta m_i); always >= 0."""
    beta = ctx.check_beta(beta)
    s = np.exp(-np.abs(beta * ctx._m))
    sech = 2.0 * s / (1.0 + s * s)
    return float(np.sum((ctx._m * sech) ** 2))


@dataclass
class EstimateReport:
    beta_hat: float
    iterations: int
    final_grad_norm: float
    flippable_count: int
    converged: bool
    at_boundary: bool
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "beta_hat": self.beta_hat,
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "flippable_count": self.flippable_count,
            "converged": self.converged,
            "at_boundary": self.at_boundary,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def default_max_iters(n: int, max_degree: int) -> int:
    """ceil(20 * Delta^3 * ln(n)) plus margin; covers the expected iteration count."""
    return int(math.ceil(20.0 * max_degree**3 * math.log(max(n, 2)))) + 50


def estimate_mple(
    model: TruncatedIsingModel,
    sample,
    B: Optional[float] = None,
    max_iters: Optional[int] = None,
    grad_tol: Optional[float] = None,
) -> EstimateReport:
    """Projected gradient descent on objective/n over [-B, B].

    Starts at beta = 0 with unit step size; stops when the normalized
    gradient falls to grad_tol (default 1/sqrt(n)) or the clamped iterate
    stops moving (pinned at a boundary), whichever first; gives up
    unconverged after max_iters updates.

    Raises DegenerateObjectiveError when no coordinate is flippable or every
    flippable coordinate has zero magnetization (the objective is constant),
    and SampleNotInSupportError when the sample fails the formula.
    """
    t0 = time.perf_counter()
    ctx = PseudolikelihoodContext.from_sample(model, sample, B)
    if ctx.flippable_count == 0 or not np.any(ctx._m != 0.0):
        raise DegenerateObjectiveError(
            "objective is constant: no flippable coordinate carries a nonzero "
            "magnetization"
        )
    n = ctx.n
    bound = ctx.B
    tol = (1.0 / math.sqrt(n)) if grad_tol is None else float(grad_tol)
    if max_iters is None:
        max_iters = default_max_iters(n, model.graph.max_degree)

    beta = 0.0
    updates = 0
    converged = False
    while True:
        grad = gradient(ctx, beta) / n
        if abs(grad) <= tol:
            converged = True
            break
        if updates >= max_iters:
            break
        new = min(max(beta - grad, -bound), bound)
        updates += 1
        if new == beta:
            # pinned at a boundary with the gradient pointing outward
            converged = True
            break
        beta = new
    return EstimateReport(
        beta_hat=beta,
        iterations=updates,
        final_grad_norm=abs(grad),
        flippable_count=ctx.flippable_count,
        converged=converged,
        at_boundary=abs(beta) >= bound,
        wall_time=time.perf_counter() - t0,
    )


def golden_section_minimize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> float:
    """Golden-section minimizer of a unimodal scalar function on [lo, hi]."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iters):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def mle_oracle(
    model: TruncatedIsingModel, sample, B: Optional[float] = None, tol: float = 1e-8
) -> float:
    """Exact maximum-likelihood estimate by golden section over [-B, B].

    The log-likelihood of one sample is beta * E(sigma)/2 - log Z(beta); the
    support energies come from one enumeration, so each log Z evaluation is a
    log-sum-exp over them. Enumeration scale only.
    """
    bound = model.beta_bound if B is None else float(B)
    spins = _cnf.as_spin_vector(sample, model.n)
    if not _cnf.satisfies(model.formula, spins):
        raise SampleNotInSupportError("sample does not satisfy the formula")
    dist = enumerate_exact(model, 0.0)
    energies = dist.energies
    e_obs = energy(model, spins)

    def neg_loglik(beta: float) -> float:
        lw = beta * energies / 2.0
        m = float(lw.max())
        log_z = m + math.log(np.exp(lw - m).sum())
        return -(beta * e_obs / 2.0 - log_z)

    return golden_section_minimize(neg_loglik, -bound, bound, tol=tol)


@dataclass
class ErrorBound:
    """Diagnostic decomposition |beta_hat - beta_star| <= numerator/denominator."""

    numerator: float  # |gradient at beta_star|
    denominator: float  # min curvature over [-B, B]
    bound: float  # their ratio (inf when the curvature floor is 0)


def error_decomposition(
    ctx: PseudolikelihoodContext, beta_star: float, beta_hat: float
) -> ErrorBound:
    """|gradient(beta_star)| and the curvature minimum over [-B, B].

    The minimum is located on a 1024-point grid including the endpoints, then
    refined by golden section around the best grid point. The ratio bounds
    |beta_hat - beta_star| whenever beta_hat is interior.
    """
    ctx.check_beta(beta_star)
    ctx.check_beta(beta_hat)
    num = abs(gradient(ctx, beta_star))
    den = min_curvature(ctx)
    bound = num / den if den > 0 else math.inf
    return ErrorBound(numerator=num, denominator=den, bound=bound)


def min_curvature(ctx: PseudolikelihoodContext, grid_points: int = 1024) -> float:
    """min over beta in [-B, B] of curvature(ctx, beta), grid plus refinement."""
    bound = ctx.B
    grid = np.linspace(-bound, bound, grid_points)
    vals = np.array([curvature(ctx, b) for b in grid])
    j = int(vals.argmin())
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid_points - 1)]
    best = float(vals[j])
    if hi > lo:
        refined = golden_section_minimize(lambda b: curvature(ctx, b), lo, hi)
        best = min(best, curvature(ctx, refined))
    return best
