"""Joint transmit-power control and receive scaling.

Minimizes the spectral norm of the centred expected mixing matrix over the
power factors ``alpha`` and scalings ``gamma``, subject to box bounds and the
balance equality that makes the expected matrix column stochastic.  The
problem is bilinear; it is solved by alternating between the two convex
blocks, each handled by a projected subgradient method.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize_scalar

from .consensus import build_wbar, expected_mixing
from .network import NetworkTopology

log = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-6
INNER_ITERATIONS = 5000
BALANCE_TOL = 1e-9


class InfeasibleError(ValueError):
    """The box and balance constraints have no common point."""


@dataclass(frozen=True)
class PcssConfig:
    alpha: np.ndarray
    gamma: np.ndarray
    alpha_max: float = 5.0
    gamma_max: float = 5.0


@dataclass
class AmReport:
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    final_objective: float = float("nan")
    converged: bool = False
    epsilon: float = 1e-4


def _centred(w):
    n = w.shape[0]
    return w - np.full((n, n), 1.0 / n)


def objective(topology: NetworkTopology, alpha, gamma) -> float:
    return float(np.linalg.norm(_centred(build_wbar(topology, alpha, gamma)), 2))


def balance_residual(topology: NetworkTopology, alpha, gamma):
    beta = topology.beta
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return gamma * (beta @ alpha) - alpha * (beta.T @ gamma)


def _balance_matrix(beta, fixed, free):
    """Matrix ``A`` with ``A @ v == balance_residual`` for the free block ``v``."""
    if free == "alpha":
        gamma = fixed
        return gamma[:, None] * beta - np.diag(beta.T @ gamma)
    alpha = fixed
    return np.diag(beta @ alpha) - alpha[:, None] * beta.T


def _subgradient(beta, alpha, gamma, free):
    """A subgradient of the objective in the free block, from the top singular pair."""
    w = expected_mixing(beta, alpha, gamma)
    u, _, vt = np.linalg.svd(_centred(w))
    u, v = u[:, 0], vt[0]
    diff = v[None, :] - v[:, None]  # diff[n, k] = v_k - v_n
    if free == "alpha":
        return (gamma[:, None] * beta * u[:, None] * diff).sum(axis=0)
    return u * (beta * alpha[None, :] * diff).sum(axis=1)


class _FeasibleSet:
    """Euclidean projection onto ``{A v = 0, lo <= v <= hi}``."""

    def __init__(self, a, lo, hi):
        self.lo, self.hi = lo, hi
        self.basis = null_space(a, rcond=1e-12)
        if self.basis.shape[1] == 0:
            raise InfeasibleError("balance equality only admits the zero vector")
        self.ray = None
        if self.basis.shape[1] == 1:
            z = self.basis[:, 0]
            z = z if z.sum() > 0 else -z
            if np.any(z <= 0):
                raise InfeasibleError("balance direction has mixed signs")
            t_lo, t_hi = np.max(lo / z), np.min(hi / z)
            if t_lo > t_hi:
                raise InfeasibleError("box bounds and balance equality do not intersect")
            self.ray = (z, t_lo, t_hi)

    def project(self, y):
        if self.ray is not None:
            z, t_lo, t_hi = self.ray
            return np.clip(z @ y / (z @ z), t_lo, t_hi) * z
        return self._dykstra(y)

    def _dykstra(self, y, iters=20000, tol=1e-13):
        q = self.basis
        x, p, r = y.copy(), np.zeros_like(y), np.zeros_like(y)
        for _ in range(iters):
            b = q @ (q.T @ (x + p))
            p = x + p - b
            x_new = np.clip(b + r, self.lo, self.hi)
            r = b + r - x_new
            if np.max(np.abs(x_new - x)) < tol:
                x = x_new
                break
            x = x_new
        return q @ (q.T @ x)


def _solve_block(topology, fixed, bound, warm_start, free, iterations=INNER_ITERATIONS):
    beta = topology.beta
    fixed = np.asarray(fixed, dtype=float)
    n = topology.n_agents
    lo = np.full(n, POSITIVITY_FLOOR)
    hi = np.full(n, float(bound))
    feasible = _FeasibleSet(_balance_matrix(beta, fixed, free), lo, hi)

    def f(v):
        return objective(topology, v, fixed) if free == "alpha" else objective(topology, fixed, v)

    def grad(v):
        return _subgradient(beta, v, fixed, "alpha") if free == "alpha" else _subgradient(beta, fixed, v, "gamma")

    a = np.asarray(warm_start, dtype=float)
    start_ok = (
        np.all(a >= lo) and np.all(a <= hi)
        and np.max(np.abs(_balance_matrix(beta, fixed, free) @ a)) <= BALANCE_TOL * max(1.0, np.abs(a).max())
    )
    best = a.copy() if start_ok else feasible.project(a)
    best_f = f(best)
    if feasible.ray is not None:
        # the objective restricted to a ray is a convex function of one variable
        z, t_lo, t_hi = feasible.ray
        res = minimize_scalar(lambda t: f(t * z), bounds=(t_lo, t_hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, t_hi)})
        for t in (res.x, t_lo, t_hi):
            cand = np.clip(t, t_lo, t_hi) * z
            fc = f(cand)
            if fc < best_f:
                best, best_f = cand, fc
        return best
    v = best.copy()
    scale = 0.25 * float(bound)
    for k in range(iterations):
        g = grad(v)
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        v = feasible.project(v - scale / np.sqrt(k + 1.0) * g / gn)
        fv = f(v)
        if fv < best_f:
            best, best_f = v.copy(), fv
    return best


def solve_subproblem_alpha(topology, gamma, alpha_max, warm_start, iterations=INNER_ITERATIONS):
    """Best power factors for fixed scalings; never worse than a feasible warm start."""
    return _solve_block(topology, gamma, alpha_max, warm_start, "alpha", iterations)


def solve_subproblem_gamma(topology, alpha, gamma_max, warm_start, iterations=INNER_ITERATIONS):
    return _solve_block(topology, alpha, gamma_max, warm_start, "gamma", iterations)


def alternating_minimization(
    topology: NetworkTopology, alpha0, gamma0, epsilon=1e-4, max_outer=50,
    alpha_max=5.0, gamma_max=5.0, iterations=INNER_ITERATIONS,
):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    alpha = np.asarray(alpha0, dtype=float).copy()
    gamma = np.asarray(gamma0, dtype=float).copy()
    report = AmReport(epsilon=epsilon)
    for k in range(1, max_outer + 1):
        alpha_new = solve_subproblem_alpha(topology, gamma, alpha_max, alpha, iterations)
        gamma_new = solve_subproblem_gamma(topology, alpha_new, gamma_max, gamma, iterations)
        d_alpha = np.max(np.abs(alpha_new - alpha))
        d_gamma = np.max(np.abs(gamma_new - gamma))
        alpha, gamma = alpha_new, gamma_new
        report.iterations = k
        report.objective_trace.append(objective(topology, alpha, gamma))
        log.debug("AM iteration %d: objective %.10f", k, report.objective_trace[-1])
        if d_alpha < epsilon and d_gamma < epsilon:
            report.converged = True
            break
    report.final_objective = report.objective_trace[-1]
    return PcssConfig(alpha, gamma, float(alpha_max), float(gamma_max)), report


def refine_joint(topology: NetworkTopology, u0, alpha_max=5.0, gamma_max=5.0, iterations=3000):
    """Local descent over points that satisfy the balance equality by construction.

    With symmetric fading, ``alpha`` proportional to ``gamma`` is always
    balanced, and the alternating blocks can only rescale such a pair.  This
    moves the common direction ``u`` instead, with
    ``alpha = u * sqrt(alpha_max / gamma_max)`` and
    ``gamma = u * sqrt(gamma_max / alpha_max)``.  Returns ``(alpha, gamma)``.
    """
    beta = topology.beta
    ka, kg = np.sqrt(alpha_max / gamma_max), np.sqrt(gamma_max / alpha_max)
    hi = np.sqrt(alpha_max * gamma_max)
    lo = POSITIVITY_FLOOR / min(ka, kg)

    def f(u):
        return objective(topology, ka * u, kg * u)

    u = np.clip(np.asarray(u0, dtype=float), lo, hi)
    best, best_f = u.copy(), f(u)
    scale = 0.1 * hi
    for k in range(iterations):
        g = ka * _subgradient(beta, ka * u, kg * u, "alpha") + kg * _subgradient(beta, ka * u, kg * u, "gamma")
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        u = np.clip(u - scale / np.sqrt(k + 1.0) * g / gn, lo, hi)
        fu = f(u)
        if fu < best_f:
            best, best_f = u.copy(), fu
    return ka * best, kg * best


def design(topology: NetworkTopology, alpha_max=5.0, gamma_max=5.0, epsilon=1e-4, max_outer=50, start="refined"):
    """PCSS parameters for a topology.

    ``start="ones"`` runs the alternating scheme from all-ones vectors.
    ``start="refined"`` first improves the balanced direction from a few
    deterministic starting points and then runs the alternating scheme from
    the best one; the all-ones result is kept if it is better.
    """
    n = topology.n_agents
    ones = np.ones(n)
    config, report = alternating_minimization(topology, ones, ones, epsilon, max_outer, alpha_max, gamma_max)
    if start == "ones":
        return config, report
    if start != "refined":
        raise ValueError(f"unknown PCSS start {start!r}")
    hi = np.sqrt(alpha_max * gamma_max)
    degree = topology.beta.sum(axis=1)
    starts = [hi * ones, np.minimum(hi, hi * np.sqrt(degree.min() / degree))]
    candidates = [refine_joint(topology, u, alpha_max, gamma_max) for u in starts]
    a0, g0 = min(candidates, key=lambda ag: objective(topology, *ag))
    refined = alternating_minimization(topology, a0, g0, epsilon, max_outer, alpha_max, gamma_max)
    if refined[1].final_objective < report.final_objective:
        return refined
    return config, report


def save_pcss(config: PcssConfig, path):
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["agent_id", "alpha", "gamma"])
            for n, (a, g) in enumerate(zip(config.alpha, config.gamma)):
                w.writerow([n, repr(float(a)), repr(float(g))])
    except OSError as exc:
        raise OSError(f"cannot write PCSS parameters to {path}: {exc}") from exc


def load_pcss(path, alpha_max=5.0, gamma_max=5.0) -> PcssConfig:
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["agent_id"]))
    alpha = np.array([float(r["alpha"]) for r in rows])
    gamma = np.array([float(r["gamma"]) for r in rows])
    return PcssConfig(alpha, gamma, alpha_max, gamma_max)
