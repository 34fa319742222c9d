"""Seeded Monte Carlo experiments over the four consensus variants.

Random streams
--------------
Every stream is derived from the master seed with
``numpy.random.SeedSequence(seed, spawn_key=(stream, index))``:

* stream 0: topology placement and shadowing,
* stream 1: initial states,
* stream 2, index m: channel and noise draws of realization m.

A realization can therefore be replayed on its own, and all algorithms in one
comparison see the same channel at every iteration.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .consensus import ConsensusState, StepSchedule, baseline_parameters, step_ac, step_dpgd
from .network import PathLossParams, draw_channel_block, generate_topology, load_topology
from .ota import Codebook, combine_network
from .pcss import PcssConfig, design, load_pcss

log = logging.getLogger(__name__)

ALGORITHMS = ("AC", "AC_PCSS", "DPGD_AC", "DPGD_AC_PCSS")
TOPOLOGY_STREAM, INITIAL_STREAM, CHANNEL_STREAM = 0, 1, 2
CHUNK = 256


def stream(seed, kind, index=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(kind, index)))


@dataclass(frozen=True)
class ExperimentSpec:
    algorithm: str = "DPGD_AC_PCSS"
    n_agents: int = 9
    iterations: int = 10_000
    realizations: int = 100
    seed: int = 0
    noise_variance: float = 1e-7
    x_max: float = 250.0
    codebook_margin: float = 1.2
    zeta_exponent: float = 0.1
    eta_exponent: float = 1.0
    epsilon: float = 1e-4
    max_outer: int = 50
    alpha_max: float = 5.0
    gamma_max: float = 5.0
    theta: float = 0.5
    area_side: float = 300.0
    min_distance: float = 20.0
    antenna_gain_db: float = 3.0
    path_loss_exponent: float = 4.0
    ref_distance: float = 10.0
    shadowing_std_db: float = 7.0
    pcss_start: str = "refined"
    topology: str = "generate"
    pcss_file: str = ""
    trajectories: str = "none"
    trajectory_stride: int = 10
    trajectory_realizations: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS and self.algorithm != "compare":
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS} or 'compare'")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if self.trajectory_stride < 1 or self.trajectory_realizations < 1:
            raise ValueError("trajectory_stride and trajectory_realizations must be at least 1")
        if self.codebook_margin <= 1:
            raise ValueError("codebook_margin must exceed 1")
        if self.trajectories not in ("none", "sampled", "full"):
            raise ValueError("trajectories must be one of none, sampled, full")
        if self.pcss_start not in ("refined", "ones"):
            raise ValueError("pcss_start must be 'refined' or 'ones'")

    @property
    def path_loss(self):
        return PathLossParams(self.antenna_gain_db, self.path_loss_exponent, self.ref_distance, self.shadowing_std_db)

    @property
    def schedule(self):
        return StepSchedule(self.zeta_exponent, self.eta_exponent)

    @property
    def codebook(self):
        return Codebook.for_bound(self.x_max, self.codebook_margin)

    @classmethod
    def from_file(cls, path, **overrides):
        """Read a flat ``key = value`` file; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    key, _, value = line.partition(":")
                key, value = key.strip().replace("-", "_"), value.strip()
                if key not in types:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _coerce(types[key], value)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(type_name, value):
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    return value


@dataclass
class MetricTrace:
    algorithm: str
    ce: np.ndarray
    rmse: np.ndarray
    final_states: np.ndarray | None = None  # (M, N)
    max_abs_state: float = float("nan")
    trajectory_t: np.ndarray | None = None
    trajectories: np.ndarray | None = None  # (R, len(trajectory_t), N)
    extras: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ce)

    def first_below(self, fraction):
        """First iteration whose RMSE is below ``fraction`` of the initial RMSE."""
        hits = np.flatnonzero(self.rmse < fraction * self.rmse[0])
        return int(hits[0]) if len(hits) else None


def consensus_error(x, x_star):
    x = np.asarray(x, dtype=float)
    x_star = np.asarray(x_star, dtype=float)[..., None]
    return np.sqrt(np.mean((x - x_star) ** 2, axis=-1))


def rmse(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.mean((x - x.mean(axis=-1, keepdims=True)) ** 2, axis=-1))


@dataclass
class Setup:
    """Everything shared by the algorithms of one comparison."""

    topology: object
    x0: np.ndarray
    pcss: PcssConfig
    am_report: object
    baseline_alpha: np.ndarray
    baseline_gamma: np.ndarray

    def parameters(self, algorithm):
        if algorithm.endswith("PCSS"):
            return self.pcss.alpha, self.pcss.gamma
        return self.baseline_alpha, self.baseline_gamma


def prepare(spec: ExperimentSpec) -> Setup:
    if spec.topology == "generate":
        topology = generate_topology(
            spec.n_agents, spec.area_side, spec.min_distance, spec.path_loss, stream(spec.seed, TOPOLOGY_STREAM)
        )
    else:
        topology = load_topology(spec.topology, spec.min_distance, spec.area_side)
    n = topology.n_agents
    x0 = stream(spec.seed, INITIAL_STREAM).uniform(-spec.x_max, spec.x_max, size=n)
    if spec.pcss_file:
        config, report = load_pcss(spec.pcss_file, spec.alpha_max, spec.gamma_max), None
    else:
        config, report = design(
            topology, spec.alpha_max, spec.gamma_max, spec.epsilon, spec.max_outer, spec.pcss_start
        )
    if report is not None:
        log.info("PCSS objective %.6f after %d outer iterations", report.final_objective, report.iterations)
    alpha_b, gamma_b = baseline_parameters(topology, config.alpha, spec.theta, spec.gamma_max)
    return Setup(topology, x0, config, report, alpha_b, gamma_b)


def simulate(spec: ExperimentSpec, setup: Setup, algorithms) -> list[MetricTrace]:
    """Run ``algorithms`` side by side on common channel draws."""
    algorithms = list(algorithms)
    n_alg, m_real, t_total = len(algorithms), spec.realizations, spec.iterations
    topology, n = setup.topology, setup.topology.n_agents
    codebook, schedule, sigma2 = spec.codebook, spec.schedule, spec.noise_variance
    sqrt_beta = np.sqrt(topology.beta)

    alpha = np.stack([setup.parameters(a)[0] for a in algorithms])[:, None, :]
    gamma = np.stack([setup.parameters(a)[1] for a in algorithms])[:, None, :]
    projected = np.array([a.startswith("DPGD") for a in algorithms])

    x0 = np.broadcast_to(setup.x0, (n_alg, m_real, n)).copy()
    state = ConsensusState(x0.copy(), x0, 0, spec.x_max)
    x_star = setup.x0.mean()
    rngs = [stream(spec.seed, CHANNEL_STREAM, m) for m in range(m_real)]

    ce = np.empty((n_alg, t_total))
    rm = np.empty((n_alg, t_total))
    max_abs = np.zeros(n_alg)

    capture = spec.trajectories != "none"
    stride = 1 if spec.trajectories == "full" else spec.trajectory_stride
    n_cap = min(spec.trajectory_realizations, m_real)
    traj_t = np.arange(0, t_total, stride)
    traj = np.empty((n_alg, n_cap, len(traj_t), n)) if capture else None

    h = noise = None
    for t in range(t_total):
        x = state.x
        ce[:, t] = consensus_error(x, x_star).mean(axis=1)
        rm[:, t] = rmse(x).mean(axis=1)
        max_abs = np.maximum(max_abs, np.abs(x).max(axis=(1, 2)))
        if capture and t % stride == 0:
            traj[:, :, t // stride] = x[:, :n_cap]
        if t == t_total - 1:
            break
        k = t % CHUNK
        if k == 0:
            size = min(CHUNK, t_total - 1 - t)
            blocks = [draw_channel_block(n, sigma2, rng, size) for rng in rngs]
            h = np.stack([b[0] for b in blocks], axis=1)  # (chunk, M, N, N)
            noise = np.stack([b[1] for b in blocks], axis=1)  # (chunk, M, N, 2)
        g = h[k] * sqrt_beta
        c = combine_network(x, alpha, g[None], noise[k][None], codebook, sigma2, spec.x_max)
        ac_next = step_ac(state, c, gamma, schedule)
        dpgd_next = step_dpgd(state, c, gamma, schedule)
        state = replace(ac_next, x=np.where(projected[:, None, None], dpgd_next.x, ac_next.x))

    traces = []
    for i, name in enumerate(algorithms):
        traces.append(
            MetricTrace(
                algorithm=name,
                ce=ce[i],
                rmse=rm[i],
                final_states=state.x[i].copy(),
                max_abs_state=float(max_abs[i]),
                trajectory_t=traj_t if capture else None,
                trajectories=traj[i] if capture else None,
                extras={"x_star": float(x_star)},
            )
        )
    return traces


def run_experiment(spec: ExperimentSpec, setup: Setup | None = None) -> MetricTrace:
    if spec.algorithm == "compare":
        raise ValueError("use compare_algorithms for algorithm='compare'")
    setup = setup or prepare(spec)
    return simulate(spec, setup, [spec.algorithm])[0]


def compare_algorithms(spec_base: ExperimentSpec, setup: Setup | None = None) -> list[MetricTrace]:
    setup = setup or prepare(spec_base)
    return simulate(spec_base, setup, ALGORITHMS)


def final_bias(trace: MetricTrace) -> float:
    """|mean over realizations and agents of the final state - target|."""
    return abs(float(trace.final_states.mean()) - trace.extras["x_star"])


def _fmt(v):
    return repr(float(v))


def emit_csv(traces, path, trajectories_path=None):
    """Write ``t,algorithm,ce,rmse`` rows; optionally ``t,realization,agent,x``."""
    if isinstance(traces, MetricTrace):
        traces = [traces]
    for tr in traces:
        if len(tr) == 0:
            raise ValueError(f"empty trace for {tr.algorithm}: at least one iteration is required")
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "algorithm", "ce", "rmse"])
            for tr in traces:
                for t in range(len(tr)):
                    w.writerow([t, tr.algorithm, _fmt(tr.ce[t]), _fmt(tr.rmse[t])])
        if trajectories_path is not None:
            with open(trajectories_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                multi = len(traces) > 1
                w.writerow(["t", "algorithm", "realization", "agent", "x"] if multi else ["t", "realization", "agent", "x"])
                for tr in traces:
                    if tr.trajectories is None:
                        continue
                    for r, per_real in enumerate(tr.trajectories):
                        for j, t in enumerate(tr.trajectory_t):
                            for agent, value in enumerate(per_real[j]):
                                row = [int(t), r, agent, _fmt(value)]
                                w.writerow([row[0], tr.algorithm, *row[1:]] if multi else row)
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics(path):
    """Parse a metrics file back into ``{algorithm: (ce, rmse)}``."""
    rows = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(r["algorithm"], []).append((int(r["t"]), float(r["ce"]), float(r["rmse"])))
    out = {}
    for name, items in rows.items():
        items.sort()
        out[name] = (np.array([i[1] for i in items]), np.array([i[2] for i in items]))
    return out
