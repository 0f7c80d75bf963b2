"""Two-stage per-slot environment: antennas move, then the transmitter beamforms.

Agent order (fixed, used for joint critic inputs and CSV columns)::

    heterogeneous DS : ma_tx, ma_rx0 .. ma_rx{K-1}, bf
    heterogeneous RMA: ma_rx0 .. ma_rx{K-1}, bf
    FPA              : bf
    TR               : tr_tx, tr_rx0 .. tr_rx{K-1}

``tr_tx`` moves the transmit antennas and outputs W from the pre-movement CSI.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import channel, geometry, rates
from .geometry import AntennaLayout


@dataclass
class AgentInfo:
    name: str
    role: str  # ma-transmitter | ma-receiver | beamforming | tr-transmitter | tr-receiver
    obs_dim: int
    act_dim: int
    array: int | None  # index into layout.arrays(), None for pure beamforming
    sees_reconfigured: bool  # observes Hhat^{t+1} instead of Hhat^t


def agent_layout(config):
    N, K, M = config.N, config.K, config.M
    full = 2 * N * sum(M)
    bf_dim = 2 * N * K
    pos = 2 if config.observe_positions else 0
    rx = lambda prefix, role: [
        AgentInfo(f"{prefix}_rx{k}", role, 2 * N * M[k] + pos * M[k], 2 * M[k], k + 1, False)
        for k in range(K)]
    if config.algorithm == "TR":
        return [AgentInfo("tr_tx", "tr-transmitter", full + pos * N, 2 * N + bf_dim, 0, False),
                *rx("tr", "tr-receiver")]
    bf = AgentInfo("bf", "beamforming", full, bf_dim, None, True)
    if config.scheme == "FPA":
        return [bf]
    agents = rx("ma", "ma-receiver")
    if config.scheme == "DS":
        agents.insert(0, AgentInfo("ma_tx", "ma-transmitter", full + pos * N, 2 * N, 0, False))
    return [*agents, bf]


def obs_scale(config):
    """1 / sqrt(E|h_ij|^2) under the gain model, so CSI inputs are O(1)."""
    return 1.0 / np.sqrt(config.los_var + (max(config.L) - 1) * config.nlos_var)


def flatten_csi(mats, scale):
    """Real and imaginary parts interleaved, receivers concatenated."""
    parts = []
    for H in mats:
        z = np.empty(H.size * 2)
        flat = H.ravel()
        z[0::2] = flat.real
        z[1::2] = flat.imag
        parts.append(z)
    return np.concatenate(parts) * scale


def form_beamformer(action, config):
    """W = sqrt(P/K) (Re part + j Im part), Re{W} first then Im{W}, row-major N x K."""
    a = np.asarray(action, dtype=float)
    nk = config.N * config.K
    if a.shape != (2 * nk,):
        raise ValueError(f"beamforming action must have length {2 * nk}")
    scale = np.sqrt(config.power / config.K)
    return scale * (a[:nk] + 1j * a[nk:]).reshape(config.N, config.K)


def project_power(W, P):
    p = rates.power(W)
    return W * np.sqrt(P / p) if p > P else W


def power_penalty(W, P):
    return max(0.0, rates.power(W) - P) / P


@dataclass
class EnvState:
    layout: AntennaLayout
    realization: channel.ChannelRealization
    t: int = 0


class MovableAntennaEnv:
    """One episode at a time; ``reset`` draws paths and an initial layout.

    Randomness comes from three independent generators: ``channel`` (paths),
    ``init`` (initial layouts) and ``cee`` (estimation errors, redrawn every slot).
    """

    def __init__(self, config, streams, project=False):
        self.config = config
        self.rng_paths = streams["channel"]
        self.rng_init = streams["init"]
        self.rng_cee = streams["cee"]
        self.project = project
        self.cee = channel.CeeModel.scaled_identity(config.N, config.M, config.nmse)
        self.region = geometry.Region(config.region)
        self.agents = agent_layout(config)
        self.scale = obs_scale(config)
        self.state = None
        self.paths = None
        self.trace = []
        self._pending = None

    # -- episode control -----------------------------------------------------------

    def initial_layout(self):
        cfg = self.config
        if cfg.scheme == "FPA":
            return geometry.init_layout(self.rng_init, cfg, "fpa-grid")
        layout = geometry.init_layout(self.rng_init, cfg, "random-feasible")
        if cfg.scheme == "RMA":
            layout.tx = geometry.fpa_positions(cfg.N)
        return layout

    def reset(self):
        self.paths = channel.sample_paths(self.rng_paths, self.config)
        layout = self.initial_layout()
        real = channel.realize_channel(self.rng_cee, layout, self.paths, self.cee)
        self.state = EnvState(layout, real, 0)
        self.trace = []
        self._pending = None
        return self.observe_moving()

    # -- observations --------------------------------------------------------------

    def csi_obs(self, real, agent):
        if agent.role in ("ma-receiver", "tr-receiver"):
            return flatten_csi([real.estimated[agent.array - 1]], self.scale)
        return flatten_csi(real.estimated, self.scale)

    def moving_obs(self, real, layout, agent):
        obs = self.csi_obs(real, agent)
        if self.config.observe_positions:
            # own antenna coordinates mapped to [-1, 1]
            own = layout.arrays()[agent.array]
            obs = np.concatenate([obs, (2.0 / self.region.side) * own.ravel() - 1.0])
        return obs

    def observe_moving(self):
        """Observations from Hhat^t for every agent that acts before the move."""
        return {a.name: self.moving_obs(self.state.realization, self.state.layout, a)
                for a in self.agents if not a.sees_reconfigured}

    # -- slot stages ---------------------------------------------------------------

    def apply_ma_actions(self, layout, actions):
        """Move controlled arrays by delta * v; returns (new layout, {agent: (blp, msp)})."""
        new = layout.copy()
        arrays = new.arrays()
        penalties = {}
        delta = self.config.step_size
        for agent in self.agents:
            if agent.array is None:
                continue
            if self.config.scheme == "RMA" and agent.array == 0:
                continue
            n_ant = len(arrays[agent.array])
            v = np.asarray(actions[agent.name], dtype=float)[: 2 * n_ant].reshape(n_ant, 2)
            moved = arrays[agent.array] + delta * np.clip(v, -1.0, 1.0)
            msp = geometry.region_distance(moved, self.region)
            moved = np.clip(moved, 0.0, self.region.side)
            arrays[agent.array][:] = moved
            penalties[agent.name] = (geometry.spacing_violation(moved), msp)
        return new, penalties

    def reconfigure(self, layout):
        """Recompute H from the fixed episode paths at ``layout`` and draw a fresh CEE."""
        return channel.realize_channel(self.rng_cee, layout, self.paths, self.cee)

    def move(self, ma_actions):
        """Stage one: apply movement, return observations for the next stage.

        Heterogeneous wiring returns the beamforming agent's view of Hhat^{t+1};
        TR wiring returns an empty dict (W was already chosen from Hhat^t).
        """
        if self.state.t >= self.config.n_step:
            raise RuntimeError("episode finished; call reset()")
        old = self.state.realization
        layout, penalties = self.apply_ma_actions(self.state.layout, ma_actions)
        new = self.reconfigure(layout)
        self._pending = (layout, new, penalties, old, dict(ma_actions))
        return {a.name: self.csi_obs(new, a) for a in self.agents if a.sees_reconfigured}

    def beamform(self, bf_action=None):
        """Stage two: form W, score the slot, advance. Returns (rewards, info)."""
        if self._pending is None:
            raise RuntimeError("move() must precede beamform()")
        layout, new, penalties, old, ma_actions = self._pending
        self._pending = None
        cfg = self.config
        if cfg.algorithm == "TR":
            bf_action = np.asarray(ma_actions["tr_tx"], dtype=float)[2 * cfg.N:]
        W = form_beamformer(bf_action, cfg)
        pp = power_penalty(W, cfg.power)
        if self.project:
            W = project_power(W, cfg.power)
        br = rates.ub_rate(new.estimated, W, self.cee, cfg.sigma2)
        sum_rate = br.sum_rate
        rewards = {}
        for agent in self.agents:
            if agent.role == "beamforming":
                rewards[agent.name] = sum_rate - cfg.c3 * pp
            else:
                blp, msp = penalties.get(agent.name, (0.0, 0.0))
                r = sum_rate - cfg.c1 * blp - cfg.c2 * msp
                if agent.role == "tr-transmitter":
                    r -= cfg.c3 * pp
                rewards[agent.name] = r
        feas = geometry.measure_feasibility(layout, self.region)
        info = {
            "t": self.state.t,
            "sum_rate": sum_rate,
            "per_receiver": br.per_receiver.tolist(),
            "power": rates.power(W),
            "blp": sum(p[0] for p in penalties.values()),
            "msp": sum(p[1] for p in penalties.values()),
            "pp": pp,
            "feasible": feas.feasible,
            "W": W,
        }
        self.trace.append({
            "t": self.state.t,
            "layout": layout.to_dict(),
            "power": info["power"],
            "rates": info["per_receiver"],
            "penalties": {name: list(p) for name, p in penalties.items()} | {"pp": pp},
            "rewards": rewards,
        })
        self.state = EnvState(layout, new, self.state.t + 1)
        return rewards, info

    def step(self, ma_actions, bf_action):
        """Both stages. ``bf_action`` is an array or a callable mapping the reconfigured observations to one."""
        bf_obs = self.move(ma_actions)
        if callable(bf_action):
            bf_action = bf_action(bf_obs)
        rewards, info = self.beamform(bf_action)
        return self.state, rewards, self.observe_moving(), info

    @property
    def done(self):
        return self.state.t >= self.config.n_step

    def trace_jsonl(self):
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.trace)
