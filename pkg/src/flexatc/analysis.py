"""Fixed-point computation, exact conditional-expectation certificates for
the descent/contraction inequalities, and the communication-complexity
calculator.

Every "expectation" here is the exact two-point mixture over the coin
theta in {0, 1} (weights p and 1-p), so certificate slacks carry no
sampling noise. The certified quantities:

    Phi  = ||x - x*||^2 + (1/p^2) ||u - u*||^2
    Psi  = ||grad F(x) - grad F(x*)||^2 + ||u - u*||^2

with the descent inequality  E[Phi+ | theta] <= ||w - w*||^2
+ (1 - p^2 sigma_m(B)) (1/p^2) ||u - u*||^2, the linear contraction
E[Phi+ | theta] <= zeta Phi, and the sublinear step bound
E[Phi+ | theta] <= Phi - varrho Psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .combiners import CombinerPair
from .linalg import kron_apply, range_solve
from .problem import ProblemInstance
from .solver import CoinSequence, SolverState, centralized_proxgrad, flexatc_step, initial_state

SLACK_TOL = 1e-9


class CertificateError(Exception):
    """An executable inequality was violated beyond tolerance."""


@dataclass(eq=False)
class FixedPoint:
    """Reference optimum (x*, w*, u*_b) with the residuals of its
    stationarity system; x_opt is the consensus solution of length d."""

    x_opt: np.ndarray
    x_star: np.ndarray
    w_star: np.ndarray
    u_star_b: np.ndarray
    kkt_residual: float


def fixed_point(
    instance: ProblemInstance,
    pair: CombinerPair,
    alpha: float,
    tol: float = 1e-12,
    max_iters: int = 2_000_000,
    x_opt: np.ndarray | None = None,
) -> FixedPoint:
    """Solve the consensus problem to `tol` and lift it to (x*, w*, u*_b).

    u*_b is the minimum-norm solution of B u = sqrt(B) w*, which puts it in
    range(sqrt(B)). All stationarity residuals are verified before return.
    Passing a precomputed x_opt skips the centralized solve (useful when
    several combiner pairs share one problem).
    """
    if x_opt is None:
        x_opt = centralized_proxgrad(instance, alpha, max_iters=max_iters, tol=tol)
    x_star = np.tile(x_opt, (instance.n, 1))
    w_star = x_star - alpha * instance.grad_stack(x_star)
    u_star = range_solve(pair.b, kron_apply(pair.sqrt_b, w_star), tol=1e-8)

    z_star = w_star - kron_apply(pair.sqrt_b, u_star)
    r_root = float(np.linalg.norm(kron_apply(pair.sqrt_b, z_star)))
    r_prox = float(
        np.linalg.norm(x_star - instance.prox.apply(kron_apply(pair.a, z_star), alpha))
    )
    mean_block = u_star.mean(axis=0)
    r_orth = math.sqrt(instance.n) * float(np.linalg.norm(mean_block))

    w_scale = 1.0 + float(np.linalg.norm(w_star))
    if r_root > 1e-8 * w_scale:
        raise CertificateError(f"fixed point violates the dual stationarity residual: {r_root:.3e}")
    if r_prox > 1e-8 * w_scale:
        raise CertificateError(f"fixed point violates the prox stationarity residual: {r_prox:.3e}")
    if r_orth > 1e-9 * (1.0 + float(np.linalg.norm(u_star))):
        raise CertificateError(f"u* has a null-space component of size {r_orth:.3e}")

    return FixedPoint(
        x_opt=x_opt,
        x_star=x_star,
        w_star=w_star,
        u_star_b=u_star,
        kkt_residual=max(r_root, r_prox, r_orth),
    )


def _sq(v: np.ndarray) -> float:
    return float(np.sum(v * v))


def phi_value(x: np.ndarray, u: np.ndarray, p: float, fp: FixedPoint) -> float:
    return _sq(x - fp.x_star) + _sq(u - fp.u_star_b) / (p * p)


def psi_value(
    x: np.ndarray,
    u: np.ndarray,
    instance: ProblemInstance,
    fp: FixedPoint,
    grad_star: np.ndarray | None = None,
) -> float:
    if grad_star is None:
        grad_star = instance.grad_stack(fp.x_star)
    gdiff = instance.grad_stack(x) - grad_star
    return _sq(gdiff) + _sq(u - fp.u_star_b)


def _expected_phi_next(
    state: SolverState, instance: ProblemInstance, pair: CombinerPair, fp: FixedPoint
) -> tuple[float, np.ndarray]:
    """Exact E[Phi(k+1) | theta_k] over both coin outcomes; also returns w."""
    alpha, p = state.alpha, state.p
    w = state.x - alpha * instance.grad_stack(state.x)
    zu = w - kron_apply(pair.sqrt_b, state.u)

    x_comm = instance.prox.apply(kron_apply(pair.a, zu), alpha)
    u_comm = state.u + p * kron_apply(pair.sqrt_b, zu)
    phi_comm = phi_value(x_comm, u_comm, p, fp)

    x_skip = instance.prox.apply(zu, alpha)
    phi_skip = phi_value(x_skip, state.u, p, fp)

    return p * phi_comm + (1.0 - p) * phi_skip, w


def lemma2_check(
    state: SolverState, instance: ProblemInstance, pair: CombinerPair, fp: FixedPoint
) -> tuple[float, float]:
    """(slack, RHS) of the one-step descent inequality; the slack must stay
    above -tol * (1 + RHS)."""
    expected, w = _expected_phi_next(state, instance, pair, fp)
    p = state.p
    rhs = _sq(w - fp.w_star) + (1.0 - p * p * pair.sigma_m_b) * _sq(state.u - fp.u_star_b) / (p * p)
    return rhs - expected, rhs


def zeta_c(big_l: float, mu: float, alpha: float) -> float:
    """Function-only part of the linear rate, max{(1-aL)^2, (1-a mu)^2}."""
    return max((1.0 - alpha * big_l) ** 2, (1.0 - alpha * mu) ** 2)


def zeta_rate(big_l: float, mu: float, alpha: float, p: float, sigma_m: float) -> float:
    """Linear contraction factor max{(1-aL)^2, (1-a mu)^2, 1 - p^2 sigma_m}."""
    return max(zeta_c(big_l, mu, alpha), 1.0 - p * p * sigma_m)


def skip_threshold(zc: float, sigma_m: float) -> float:
    """Smallest p that keeps the linear rate at its p = 1 value.

    Values above 1 mean no skipping is free (communicate every iteration).
    """
    return math.sqrt((1.0 - zc) / sigma_m)


def theorem2_check(
    state: SolverState, instance: ProblemInstance, pair: CombinerPair, fp: FixedPoint
) -> tuple[float, float]:
    """(zeta, contraction slack zeta*Phi - E[Phi+]); needs mu > 0."""
    if instance.mu <= 0.0:
        raise CertificateError("linear-rate certificate requires a strongly convex instance")
    zeta = zeta_rate(instance.L, instance.mu, state.alpha, state.p, pair.sigma_m_b)
    expected, _ = _expected_phi_next(state, instance, pair, fp)
    phi = phi_value(state.x, state.u, state.p, fp)
    return zeta, zeta * phi - expected


def varrho(alpha: float, big_l: float, sigma_m: float) -> float:
    return min(alpha * (2.0 / big_l - alpha), sigma_m)


def theorem1_step_check(
    state: SolverState,
    instance: ProblemInstance,
    pair: CombinerPair,
    fp: FixedPoint,
    grad_star: np.ndarray | None = None,
) -> float:
    """Slack of Phi - E[Phi+] - varrho * Psi >= 0 (convex case allowed)."""
    rho = varrho(state.alpha, instance.L, pair.sigma_m_b)
    expected, _ = _expected_phi_next(state, instance, pair, fp)
    phi = phi_value(state.x, state.u, state.p, fp)
    psi = psi_value(state.x, state.u, instance, fp, grad_star)
    return phi - expected - rho * psi


def averaged_iterate_bound(
    x_avg: np.ndarray,
    u_avg: np.ndarray,
    x0: np.ndarray,
    iters: int,
    instance: ProblemInstance,
    pair: CombinerPair,
    alpha: float,
    p: float,
    fp: FixedPoint,
) -> tuple[float, float]:
    """Realized-path averaged bound: returns (measured, Phi0 / (varrho K))."""
    gdiff = instance.grad_stack(x_avg) - instance.grad_stack(fp.x_star)
    measured = _sq(gdiff) + _sq(u_avg - fp.u_star_b)
    phi0 = phi_value(x0, np.zeros_like(u_avg), p, fp)
    bound = phi0 / (varrho(alpha, instance.L, pair.sigma_m_b) * iters)
    return measured, bound


@dataclass(eq=False)
class CertificateSweep:
    """Per-iteration slacks along one replayed trajectory."""

    lemma2_slack: np.ndarray
    lemma2_rhs: np.ndarray
    thm1_slack: np.ndarray
    thm2_slack: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    zeta: float | None

    def min_slacks(self) -> dict[str, float]:
        out = {
            "lemma2": float(np.min(self.lemma2_slack)),
            "thm1": float(np.min(self.thm1_slack)),
        }
        if self.zeta is not None:
            out["thm2"] = float(np.min(self.thm2_slack))
        return out

    def violations(self, tol: float = SLACK_TOL) -> list[tuple[str, int]]:
        """(inequality, iteration) pairs where the slack dips below -tol
        relative to its reference scale."""
        bad = []
        idx = np.nonzero(self.lemma2_slack < -tol * (1.0 + self.lemma2_rhs))[0]
        if idx.size:
            bad.append(("lemma2", int(idx[0])))
        idx = np.nonzero(self.thm1_slack < -tol * (1.0 + self.phi))[0]
        if idx.size:
            bad.append(("thm1", int(idx[0])))
        if self.zeta is not None:
            idx = np.nonzero(self.thm2_slack < -tol * (1.0 + self.phi))[0]
            if idx.size:
                bad.append(("thm2", int(idx[0])))
        return bad


def sweep_certificates(
    instance: ProblemInstance,
    pair: CombinerPair,
    alpha: float,
    p: float,
    seed: int,
    iters: int,
    fp: FixedPoint,
    x0: np.ndarray | None = None,
) -> CertificateSweep:
    """Replay a run (same coins as solver.run) and certify every transition."""
    coins = CoinSequence(p, seed).draw(iters)
    state = initial_state(instance, alpha, p, x0)
    check_linear = instance.mu > 0.0
    grad_star = instance.grad_stack(fp.x_star)

    lemma2 = np.empty(iters)
    lemma2_rhs = np.empty(iters)
    thm1 = np.empty(iters)
    thm2 = np.full(iters, np.nan)
    phi = np.empty(iters)
    psi = np.empty(iters)
    zeta = None
    for k in range(iters):
        phi[k] = phi_value(state.x, state.u, p, fp)
        psi[k] = psi_value(state.x, state.u, instance, fp, grad_star)
        lemma2[k], lemma2_rhs[k] = lemma2_check(state, instance, pair, fp)
        thm1[k] = theorem1_step_check(state, instance, pair, fp, grad_star)
        if check_linear:
            zeta, thm2[k] = theorem2_check(state, instance, pair, fp)
        state = flexatc_step(state, instance, pair, int(coins[k]))

    return CertificateSweep(lemma2, lemma2_rhs, thm1, thm2, phi, psi, zeta)


@dataclass(eq=False)
class ComplexityEstimate:
    iterations: float
    communications: float
    p_star: float


def complexity(kappa: float, sigma_m: float, rounds: int, p: float, eps: float) -> ComplexityEstimate:
    """Expected iteration/communication counts to accuracy eps, and the
    communication-optimal probability p* = min(1, 1/sqrt(kappa sigma_m))."""
    if kappa < 1.0:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if not (0.0 < sigma_m <= 1.0):
        raise ValueError(f"sigma_m must lie in (0, 1], got {sigma_m}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    log_term = math.log(1.0 / eps)
    iterations = max(kappa, 1.0 / (p * p * sigma_m)) * log_term
    communications = rounds * (p * kappa + 1.0 / (p * sigma_m)) * log_term
    return ComplexityEstimate(
        iterations=iterations,
        communications=communications,
        p_star=min(1.0, 1.0 / math.sqrt(kappa * sigma_m)),
    )
