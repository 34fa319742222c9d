"""Static network geometry and per-iteration fading/noise draws."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_PLACEMENT_ATTEMPTS = 10**6


class PlacementError(RuntimeError):
    """Raised when agents cannot be placed with the requested spacing."""


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance path loss with log-normal shadowing (all gains in dB)."""

    antenna_gain_db: float = 3.0
    path_loss_exponent: float = 4.0
    ref_distance: float = 10.0
    shadowing_std_db: float = 7.0

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.ref_distance <= 0:
            raise ValueError("ref_distance must be positive")
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing_std_db must be non-negative")

    def gain_db(self, distance, shadowing_db=0.0):
        distance = np.asarray(distance, dtype=float)
        return (
            self.antenna_gain_db
            - 10.0 * self.path_loss_exponent * np.log10(distance / self.ref_distance)
            + shadowing_db
        )


@dataclass(frozen=True)
class NetworkTopology:
    positions: np.ndarray  # (N, 2) meters
    beta: np.ndarray  # (N, N) linear power gains, zero diagonal
    min_distance: float
    area_side: float

    @property
    def n_agents(self) -> int:
        return self.beta.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # (N, N) complex, symmetric, zero diagonal
    noise: np.ndarray  # (N, 2) complex

    def gains(self, topology: NetworkTopology) -> np.ndarray:
        """Composite coefficients g = h * sqrt(beta)."""
        return self.h * np.sqrt(topology.beta)


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _place_agents(n_agents, area_side, min_distance, rng):
    positions = np.empty((n_agents, 2))
    placed = 0
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        candidate = rng.uniform(0.0, area_side, size=2)
        if placed:
            d = np.sqrt(((positions[:placed] - candidate) ** 2).sum(axis=1))
            if d.min() < min_distance:
                continue
        positions[placed] = candidate
        placed += 1
        if placed == n_agents:
            return positions
    raise PlacementError(
        f"placed only {placed}/{n_agents} agents with min_distance={min_distance} "
        f"in a {area_side} m square after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def beta_from_positions(positions, params: PathLossParams, shadowing_db=None):
    """Symmetric linear fading matrix; ``shadowing_db`` is read on the upper triangle."""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    iu = np.triu_indices(n, k=1)
    d = np.sqrt(((positions[iu[0]] - positions[iu[1]]) ** 2).sum(axis=1))
    psi = np.zeros(len(d)) if shadowing_db is None else np.asarray(shadowing_db)[iu]
    beta = np.zeros((n, n))
    beta[iu] = db_to_linear(params.gain_db(d, psi))
    return beta + beta.T


def generate_topology(n_agents, area_side, min_distance, params: PathLossParams, rng):
    """Drop agents uniformly in a square and compute large-scale fading.

    Shadowing is drawn once per unordered pair so that the resulting
    ``beta`` is exactly symmetric.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if not min_distance < area_side:
        raise ValueError("min_distance must be smaller than area_side")
    positions = _place_agents(n_agents, area_side, min_distance, rng)
    iu = np.triu_indices(n_agents, k=1)
    shadow = np.zeros((n_agents, n_agents))
    shadow[iu] = rng.normal(0.0, params.shadowing_std_db, size=len(iu[0]))
    beta = beta_from_positions(positions, params, shadow)
    return NetworkTopology(positions, beta, float(min_distance), float(area_side))


def draws_per_iteration(n_agents: int) -> int:
    """Standard normals consumed by one channel realization."""
    n_pairs = n_agents * (n_agents - 1) // 2
    return 2 * n_pairs + 4 * n_agents


def draw_channel_block(n_agents, noise_variance, rng, n_iter):
    """Draw ``n_iter`` consecutive realizations as stacked arrays.

    Each realization consumes a fixed block of normals, so splitting a run
    into blocks of any size yields the same sequence of channels.

    Returns
    -------
    h : ndarray, shape (n_iter, N, N), complex
    noise : ndarray, shape (n_iter, N, 2), complex
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    n_pairs = n_agents * (n_agents - 1) // 2
    z = rng.standard_normal((n_iter, draws_per_iteration(n_agents)))
    pairs = (z[:, 0:n_pairs] + 1j * z[:, n_pairs : 2 * n_pairs]) / np.sqrt(2.0)
    rest = z[:, 2 * n_pairs :].reshape(n_iter, 2, n_agents, 2)
    noise = np.sqrt(noise_variance / 2.0) * (rest[:, 0] + 1j * rest[:, 1])

    iu = np.triu_indices(n_agents, k=1)
    h = np.zeros((n_iter, n_agents, n_agents), dtype=complex)
    h[:, iu[0], iu[1]] = pairs
    h[:, iu[1], iu[0]] = pairs
    return h, noise


def draw_channel(topology: NetworkTopology, noise_variance, rng) -> ChannelRealization:
    h, noise = draw_channel_block(topology.n_agents, noise_variance, rng, 1)
    return ChannelRealization(h[0], noise[0])


def save_topology(topology: NetworkTopology, path) -> Path:
    """Write ``agent_id,x_m,y_m`` to ``path`` and ``i,j,beta_linear`` to its sibling.

    Returns the path of the fading-matrix file.
    """
    path = Path(path)
    beta_path = beta_path_for(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["agent_id", "x_m", "y_m"])
            for n, (x, y) in enumerate(topology.positions):
                w.writerow([n, repr(float(x)), repr(float(y))])
        with open(beta_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "beta_linear"])
            n = topology.n_agents
            for i in range(n):
                for j in range(i):
                    w.writerow([i, j, repr(float(topology.beta[i, j]))])
    except OSError as exc:
        raise OSError(f"cannot write topology to {path}: {exc}") from exc
    return beta_path


def beta_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_beta" + path.suffix)


def load_topology(path, min_distance=0.0, area_side=None) -> NetworkTopology:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["agent_id"]))
    positions = np.array([[float(r["x_m"]), float(r["y_m"])] for r in rows])
    n = len(rows)
    beta = np.zeros((n, n))
    with open(beta_path_for(path), newline="") as fh:
        for r in csv.DictReader(fh):
            i, j = int(r["i"]), int(r["j"])
            beta[i, j] = beta[j, i] = float(r["beta_linear"])
    if np.any(beta[~np.eye(n, dtype=bool)] <= 0):
        raise ValueError(f"{beta_path_for(path)}: missing or non-positive fading entries")
    if area_side is None:
        area_side = float(np.ceil(positions.max())) if n else 0.0
    return NetworkTopology(positions, beta, float(min_distance), float(area_side))
