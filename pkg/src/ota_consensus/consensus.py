"""State updates for OTA average consensus and mixing-matrix diagnostics.

All step functions accept states with arbitrary leading batch dimensions;
the last axis always indexes agents.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .network import ChannelRealization, NetworkTopology
from .ota import Codebook, combine_components


@dataclass(frozen=True)
class ConsensusState:
    x: np.ndarray
    x0: np.ndarray
    t: int = 0
    x_max: float = 250.0

    @classmethod
    def initial(cls, x0, x_max):
        x0 = np.asarray(x0, dtype=float)
        if np.any(np.abs(x0) > x_max):
            raise ValueError("initial states must lie within [-x_max, x_max]")
        return cls(x0.copy(), x0, 0, float(x_max))

    @property
    def target(self):
        return self.x0.mean(axis=-1)


@dataclass(frozen=True)
class StepSchedule:
    """Polynomially decaying step sizes ``(t+1)**-exponent``."""

    zeta_exponent: float = 0.1
    eta_exponent: float = 1.0
    fixed_zeta: bool = False


def schedule_eval(schedule: StepSchedule, t):
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    zeta = 1.0 if schedule.fixed_zeta else (t + 1.0) ** (-schedule.zeta_exponent)
    eta = (t + 1.0) ** (-schedule.eta_exponent)
    return zeta, eta


def local_gradient(state: ConsensusState, agent=None):
    d = state.x - state.x0
    return d if agent is None else d[..., agent]


def project(v, x_max):
    return np.clip(v, -x_max, x_max)


def step_dpgd(state: ConsensusState, c, gamma, schedule: StepSchedule) -> ConsensusState:
    zeta, eta = schedule_eval(schedule, state.t)
    y = state.x + zeta * gamma * c - eta * local_gradient(state)
    return replace(state, x=project(y, state.x_max), t=state.t + 1)


def step_ac(state: ConsensusState, c, gamma, schedule: StepSchedule) -> ConsensusState:
    zeta, _ = schedule_eval(schedule, state.t)
    return replace(state, x=state.x + zeta * gamma * c, t=state.t + 1)


def build_wt(
    state: ConsensusState, topology: NetworkTopology, channel: ChannelRealization,
    alpha, gamma, schedule: StepSchedule, codebook: Codebook, noise_variance,
):
    """Realized mixing matrix of one iteration, ``x + zeta*gamma*c == W @ x``.

    Diagnostic only: the diagonal divides the interference and noise terms by
    the agent's own state.
    """
    x = np.asarray(state.x, dtype=float)
    if np.any(x == 0):
        raise ZeroDivisionError(f"zero state at agents {np.flatnonzero(x == 0).tolist()}")
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    zeta, _ = schedule_eval(schedule, state.t)
    n = len(x)
    g2 = np.abs(channel.gains(topology)) ** 2
    w = zeta * gamma[:, None] * g2 * alpha[None, :]
    np.fill_diagonal(w, 0.0)
    off = w.sum(axis=1)
    for k in range(n):
        obs = combine_components(x, alpha, topology, channel, k, codebook, noise_variance, state.x_max)
        # interference and noise enter with a plus sign: W @ x must reproduce c1 + c2 + c3
        w[k, k] = 1.0 - off[k] + zeta * gamma[k] * (obs.c2 + obs.c3) / x[k]
    return w


def build_wbar(topology: NetworkTopology, alpha, gamma):
    """Expected mixing matrix with unit consensus step."""
    return expected_mixing(topology.beta, alpha, gamma)


def expected_mixing(beta, alpha, gamma):
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w = gamma[:, None] * beta * alpha[None, :]
    np.fill_diagonal(w, 0.0)
    w[np.diag_indices_from(w)] = 1.0 - w.sum(axis=1)
    return w


@dataclass(frozen=True)
class ConvergenceReport:
    c1: bool
    c2: bool
    c3: bool
    spectral_radius: float

    @property
    def all(self):
        return self.c1 and self.c2 and self.c3


def check_convergence_conditions(w, tol=1e-9) -> ConvergenceReport:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"mixing matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    ones = np.ones(n)
    rho = float(np.max(np.abs(np.linalg.eigvals(w - np.full((n, n), 1.0 / n)))))
    return ConvergenceReport(
        c1=bool(np.max(np.abs(w @ ones - 1.0)) <= tol),
        c2=bool(np.max(np.abs(ones @ w - 1.0)) <= tol),
        c3=rho < 1.0,
        spectral_radius=rho,
    )


def baseline_parameters(topology: NetworkTopology, alpha_opt, theta=0.5, gamma_max=None):
    """Equal-power reference parameters.

    Every agent transmits with the mean of the optimized power factors and
    scales its combined signal so that the expected self-weight is ``1 - theta``.
    With ``gamma_max`` the scaling is additionally capped.
    """
    n = topology.n_agents
    alpha = np.full(n, float(np.mean(alpha_opt)))
    gamma = theta / (topology.beta @ alpha)
    if gamma_max is not None:
        gamma = np.minimum(gamma, gamma_max)
    return alpha, gamma
