"""Non-coherent over-the-air link: precoding, superposition, energy decoding.

Each agent maps its (clipped) state onto two non-negative amplitudes over the
codewords ``+r`` and ``-r``.  Receivers only see the energy on each codeword
dimension, which after bias removal gives an unbiased estimate of the
fading-weighted sum of neighbour differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ChannelRealization, NetworkTopology


@dataclass(frozen=True)
class Codebook:
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("codebook radius must be positive")

    @property
    def z(self) -> np.ndarray:
        return np.array([self.r, -self.r])

    @classmethod
    def for_bound(cls, x_max, margin=1.2):
        if margin <= 1:
            raise ValueError("codebook margin must exceed 1")
        return cls(margin * x_max)


@dataclass(frozen=True)
class PrecodedSymbol:
    s: np.ndarray  # amplitudes (2,)
    p: np.ndarray  # convex weights (2,)


@dataclass(frozen=True)
class ReceivedSymbol:
    rvec: np.ndarray  # complex (2,)


@dataclass(frozen=True)
class CombinedObservation:
    c: float
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None


def encode(x, codebook: Codebook, x_max=None):
    """Convex weights ``p`` with ``p[0]*r - p[1]*r == x``.

    With ``x_max`` given the value is clipped to ``[-x_max, x_max]`` first;
    otherwise it is clipped to the codebook hull.  Works elementwise and
    returns an array with a trailing axis of length 2.
    """
    bound = codebook.r if x_max is None else x_max
    x = np.clip(np.asarray(x, dtype=float), -bound, bound)
    p1 = (x + codebook.r) / (2.0 * codebook.r)
    return np.stack([p1, 1.0 - p1], axis=-1)


def precode(x, alpha, codebook: Codebook, x_max=None) -> PrecodedSymbol:
    if alpha <= 0:
        raise ValueError(f"power factor must be positive, got {alpha}")
    p = encode(x, codebook, x_max)
    return PrecodedSymbol(np.sqrt(alpha * p), p)


def superpose(symbols, topology: NetworkTopology, channel: ChannelRealization, receiver) -> ReceivedSymbol:
    """Superimposed signal at ``receiver``; its own transmission is cancelled."""
    g = channel.gains(topology)[receiver].copy()
    g[receiver] = 0.0
    s = np.array([sym.s for sym in symbols])  # (N, 2)
    return ReceivedSymbol(g @ s + channel.noise[receiver])


def decode_energy(received: ReceivedSymbol) -> np.ndarray:
    return np.abs(received.rvec) ** 2


def combine(energies, x_self, codebook: Codebook, noise_variance) -> CombinedObservation:
    energies = np.asarray(energies, dtype=float)
    c = float(np.sum((energies - noise_variance) * (codebook.z - x_self)))
    return CombinedObservation(c)


def combine_components(
    x, alpha, topology: NetworkTopology, channel: ChannelRealization, receiver,
    codebook: Codebook, noise_variance, x_max=None,
) -> CombinedObservation:
    """Combined observation at ``receiver`` with its desired/interference/noise split.

    The energies are taken from the actual superimposed signal; ``c1``,
    ``c2`` and ``c3`` are the per-pair bookkeeping of the same quantity.
    """
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n = receiver
    z = codebook.z
    p = encode(x, codebook, x_max)  # (N, 2)
    s = np.sqrt(alpha[:, None] * p)
    others = np.array([m for m in range(len(x)) if m != n])

    h = channel.h[n, others]
    beta = topology.beta[n, others]
    amp = np.sqrt(beta * alpha[others])  # sqrt(beta * alpha) per neighbour
    noise = channel.noise[n]
    dz = z - x[n]

    rvec = (h * np.sqrt(beta)) @ s[others] + noise
    c = float(np.sum((np.abs(rvec) ** 2 - noise_variance) * dz))

    transmitted = p @ z
    c1 = float(np.sum(np.abs(h) ** 2 * amp**2 * (transmitted[others] - x[n])))

    cross = np.real(h[:, None] * np.conj(h[None, :])) * np.outer(amp, amp)
    np.fill_diagonal(cross, 0.0)
    pp = p[others]
    eps = np.sqrt(pp[:, None, 0] * pp[None, :, 0]) * dz[0] + np.sqrt(pp[:, None, 1] * pp[None, :, 1]) * dz[1]
    c2 = float(np.sum(cross * eps))

    clean = (h * np.sqrt(beta)) @ s[others]
    n_i = np.abs(noise) ** 2 + 2.0 * np.real(clean * np.conj(noise))
    c3 = float(np.sum((n_i - noise_variance) * dz))
    return CombinedObservation(c, c1, c2, c3)


def expected_combined(topology: NetworkTopology, alpha, x, agent) -> float:
    x = np.asarray(x, dtype=float)
    w = topology.beta[agent] * np.asarray(alpha, dtype=float)
    return float(np.sum(w * (x - x[agent])))


def combine_network(x, alpha, g, noise, codebook: Codebook, noise_variance, x_max=None):
    """Combined observations for every receiver at once.

    Parameters
    ----------
    x : ndarray, shape (..., N)
        Internal states; only the clipped copy is encoded.
    alpha : ndarray, broadcastable to (..., N)
    g : ndarray, shape (..., N, N)
        Composite channel coefficients with zero diagonal.
    noise : ndarray, shape (..., N, 2)

    Returns
    -------
    ndarray, shape (..., N)
    """
    p = encode(x, codebook, x_max)
    s = np.sqrt(np.asarray(alpha)[..., None] * p)
    r = np.matmul(g, s.astype(complex)) + noise
    energy = r.real**2 + r.imag**2
    dz = codebook.z - np.asarray(x)[..., None]
    return np.sum((energy - noise_variance) * dz, axis=-1)
