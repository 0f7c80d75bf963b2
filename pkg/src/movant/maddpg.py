"""Multi-agent DDPG with centralised critics for the movable-antenna downlink.

Every agent owns a deterministic tanh actor on its own observation and a
critic over the joint (observations, actions) of all agents in
``env.agent_layout`` order. Replay buffers are per agent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .config import ScenarioConfig
from .env import MovableAntennaEnv, agent_layout
from .neural import AdamState, Mlp, adam_step, soft_update
from .numerics import substreams

CHECKPOINT_FORMAT = "movant-checkpoint/1"


class NoEpisodes(ValueError):
    pass


class ReplayBuffer:
    """Bounded FIFO of joint transitions with one agent's reward; uniform sampling."""

    def __init__(self, capacity, obs_dim, act_dim):
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._alloc = 0
        self.obs = self.act = self.rew = self.next_obs = None
        self.size = 0
        self._head = 0

    def _grow(self, need):
        if need <= self._alloc:
            return
        n = min(self.capacity, max(need, 2 * self._alloc, 1024))
        def grow(a, width):
            new = np.zeros((n, width) if width else n)
            if a is not None:
                new[: self._alloc] = a
            return new
        self.obs = grow(self.obs, self.obs_dim)
        self.act = grow(self.act, self.act_dim)
        self.rew = grow(self.rew, 0)
        self.next_obs = grow(self.next_obs, self.obs_dim)
        self._alloc = n

    def add(self, obs, act, rew, next_obs):
        if self.size < self.capacity:
            self._grow(self.size + 1)
        i = self._head
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self):
        return self.size

    def sample(self, rng, batch_size):
        if self.size < batch_size:
            raise ValueError("buffer holds fewer transitions than the batch size")
        idx = rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.next_obs[idx]


@dataclass
class Agent:
    info: object
    actor: Mlp
    critic: Mlp
    actor_target: Mlp
    critic_target: Mlp
    actor_opt: AdamState
    critic_opt: AdamState
    buffer: ReplayBuffer
    obs_slice: slice = None
    act_slice: slice = None

    @property
    def name(self):
        return self.info.name


def select_action(agent, observation, noise_scale, rng):
    """Actor output plus N(0, noise_scale^2) per component, clipped to [-1, 1]."""
    a = agent.actor.forward(observation)
    if noise_scale > 0.0:
        a = a + noise_scale * rng.standard_normal(a.shape)
    return np.clip(a, -1.0, 1.0)


class Maddpg:
    def __init__(self, config, rng):
        self.config = config
        infos = agent_layout(config)
        self.obs_dim = sum(i.obs_dim for i in infos)
        self.act_dim = sum(i.act_dim for i in infos)
        joint = self.obs_dim + self.act_dim
        cfg = config
        self.agents = []
        o = a = 0
        for info in infos:
            actor = Mlp(info.obs_dim, info.act_dim, cfg.hidden, "tanh", rng=rng)
            critic = Mlp(joint, 1, cfg.hidden, "identity", rng=rng)
            agent = Agent(
                info, actor, critic, actor.copy(), critic.copy(),
                AdamState(actor.n_params, cfg.lr_actor, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
                AdamState(critic.n_params, cfg.lr_critic, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
                ReplayBuffer(cfg.capacity, self.obs_dim, self.act_dim),
                slice(o, o + info.obs_dim), slice(a, a + info.act_dim))
            o += info.obs_dim
            a += info.act_dim
            self.agents.append(agent)
        for agent in self.agents:
            if agent.critic.sizes[0] != self.obs_dim + self.act_dim:
                raise AssertionError("centralised critic input does not match joint dims")

    def __getitem__(self, name):
        for agent in self.agents:
            if agent.name == name:
                return agent
        raise KeyError(name)

    def joint(self, per_agent):
        return np.concatenate([per_agent[a.name] for a in self.agents])

    def target_actions(self, next_obs):
        return np.concatenate(
            [ag.actor_target.forward(next_obs[:, ag.obs_slice]) for ag in self.agents], axis=1)

    def critic_update(self, agent, batch):
        """One Adam step on the mean squared TD error; returns the pre-step loss."""
        obs, act, rew, next_obs = batch
        gamma = self.config.gamma
        q_next = agent.critic_target.forward(np.hstack([next_obs, self.target_actions(next_obs)]))[:, 0]
        y = self.config.reward_scale * rew + gamma * q_next
        cache = agent.critic.forward_cache(np.hstack([obs, act]))
        err = cache[-1][:, 0] - y
        loss = float(np.mean(err * err))
        grad, _ = agent.critic.backward(cache, (2.0 / len(err)) * err[:, None])
        adam_step(agent.critic_opt, agent.critic.theta, grad)
        return loss

    def actor_update(self, agent, batch):
        """One Adam ascent step on mean Q with this agent's action from its actor."""
        obs, act, _, _ = batch
        a_cache = agent.actor.forward_cache(obs[:, agent.obs_slice])
        joint_act = act.copy()
        joint_act[:, agent.act_slice] = a_cache[-1]
        c_cache = agent.critic.forward_cache(np.hstack([obs, joint_act]))
        q = c_cache[-1][:, 0]
        B = len(q)
        _, gx = agent.critic.backward(c_cache, np.full((B, 1), -1.0 / B))
        g_act = gx[:, self.obs_dim:][:, agent.act_slice]
        # keep actor pre-activations near the tanh's responsive range
        z = a_cache[3]
        reg = self.config.action_reg
        grad, _ = agent.actor.backward(a_cache, g_act, (2.0 * reg / z.size) * z if reg else None)
        adam_step(agent.actor_opt, agent.actor.theta, grad)
        return float(np.mean(q))

    def update(self, rng):
        """Critic then actor update for every agent with a full enough buffer, then target tracking."""
        out = {}
        tau = self.config.tau
        for agent in self.agents:
            if len(agent.buffer) < self.config.batch_size:
                continue
            batch = agent.buffer.sample(rng, self.config.batch_size)
            loss = self.critic_update(agent, batch)
            obj = self.actor_update(agent, batch)
            soft_update(agent.actor_target, agent.actor, tau)
            soft_update(agent.critic_target, agent.critic, tau)
            out[agent.name] = (loss, obj)
        return out

    def act(self, observations, noise_scale, rng):
        return {name: select_action(self[name], obs, noise_scale, rng)
                for name, obs in observations.items()}

    # -- persistence ---------------------------------------------------------------

    def save(self, path, extra=None):
        header = {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "agents": [],
        }
        if extra:
            header.update(extra)
        arrays = []
        for ag in self.agents:
            header["agents"].append({
                "name": ag.name, "role": ag.info.role,
                "obs_dim": ag.info.obs_dim, "act_dim": ag.info.act_dim,
                "actor": neural.net_header(ag.actor), "critic": neural.net_header(ag.critic),
                "actor_steps": ag.actor_opt.step, "critic_steps": ag.critic_opt.step,
            })
            for part in ("actor", "critic", "actor_target", "critic_target"):
                arrays.append((f"{ag.name}/{part}", getattr(ag, part).theta))
        neural.save_arrays(path, header, arrays)

    @classmethod
    def load(cls, path, config=None):
        """Rebuild agents from a checkpoint; ``config`` may override non-shape settings."""
        header, arrays = neural.load_arrays(path)
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format in {path}")
        saved = ScenarioConfig.from_dict(header["config"])
        config = saved if config is None else config
        model = cls(config, np.random.default_rng(0))
        names = [a["name"] for a in header["agents"]]
        if names != [a.name for a in model.agents]:
            raise ValueError(f"checkpoint agents {names} do not match the configured scheme")
        for ag, meta in zip(model.agents, header["agents"]):
            if (meta["obs_dim"], meta["act_dim"]) != (ag.info.obs_dim, ag.info.act_dim) \
                    or tuple(meta["actor"]["sizes"]) != ag.actor.sizes \
                    or tuple(meta["critic"]["sizes"]) != ag.critic.sizes:
                raise ValueError(f"shape mismatch for agent {ag.name} between checkpoint and config")
            for part in ("actor", "critic", "actor_target", "critic_target"):
                getattr(ag, part).theta[:] = arrays[f"{ag.name}/{part}"]
            ag.actor_opt.step = meta["actor_steps"]
            ag.critic_opt.step = meta["critic_steps"]
        return model


# ---------------------------------------------------------------------------
# training and evaluation


LOG_FIELDS_TAIL = ("sum_rate", "power", "blp", "msp", "pp", "critic_loss", "actor_objective", "noise_scale")


@dataclass
class TrainingLog:
    agent_names: list
    rows: list = field(default_factory=list)

    @property
    def columns(self):
        return ["slot", "episode", "step", *[f"reward_{n}" for n in self.agent_names], *LOG_FIELDS_TAIL]

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def noise_at(config, slot):
    return max(config.noise_min, config.noise_init * config.noise_decay ** slot)


def train(config, seed, on_row=None):
    """Offline training loop; returns (model, TrainingLog).

    Each slot: MA agents act on Hhat^t, the environment moves antennas and
    redraws the CEE, the beamforming agent acts on Hhat^{t+1}, all rewards are
    scored on (Hhat^{t+1}, W), transitions are stored and every agent gets one
    update once its buffer holds a batch.
    """
    streams = substreams(seed)
    model = Maddpg(config, streams["networks"])
    env = MovableAntennaEnv(config, streams)
    log = TrainingLog([a.name for a in model.agents])
    explore, replay = streams["explore"], streams["replay"]
    late = [a for a in model.agents if a.info.sees_reconfigured]
    slot = 0
    for episode in range(config.n_epi):
        obs = env.reset()
        pending = None
        for step in range(config.n_step):
            noise = noise_at(config, slot)
            ma_actions = model.act(obs, noise, explore)
            late_obs = env.move(ma_actions)
            late_actions = model.act(late_obs, noise, explore)
            rewards, info = env.beamform(late_actions.get("bf"))
            next_obs = env.observe_moving()
            joint_obs_parts = obs | late_obs
            joint_obs = model.joint(joint_obs_parts)
            joint_act = model.joint(ma_actions | late_actions)
            if pending is not None:
                _store(model, pending, late_obs)
            pending = (joint_obs, joint_act, rewards, next_obs)
            if not late:
                _store(model, pending, {})
                pending = None
            elif step == config.n_step - 1:
                # no further move this episode: the last reconfigured CSI stands in
                _store(model, pending, late_obs)
                pending = None
            stats = model.update(replay)
            if stats:
                loss = float(np.mean([s[0] for s in stats.values()]))
                obj = float(np.mean([s[1] for s in stats.values()]))
            else:
                loss = obj = math.nan
            row = [slot, episode, step, *[rewards[n] for n in log.agent_names],
                   info["sum_rate"], info["power"], info["blp"], info["msp"], info["pp"],
                   loss, obj, noise]
            log.rows.append(row)
            if on_row is not None:
                on_row(row)
            obs = next_obs
            slot += 1
    return model, log


def _store(model, pending, next_late_obs):
    joint_obs, joint_act, rewards, next_obs = pending
    joint_next = model.joint(next_obs | next_late_obs)
    for agent in model.agents:
        agent.buffer.add(joint_obs, joint_act, rewards[agent.name], joint_next)


def evaluate(model, config, episodes, seed):
    """Noise-free rollouts with power projection.

    The score of an episode is the mean sum-rate over its final ``eval_tail``
    fraction of slots; returns mean and std over episodes plus diagnostics.
    """
    if episodes < 1:
        raise NoEpisodes("NoEpisodes")
    streams = substreams(seed, ("channel", "init", "cee"))
    env = MovableAntennaEnv(config, streams, project=True)
    tail = max(1, int(round(config.eval_tail * config.n_step)))
    scores, per_rx, feasible = [], [], []
    for _ in range(episodes):
        obs = env.reset()
        sums, rxs = [], []
        for step in range(config.n_step):
            ma_actions = model.act(obs, 0.0, None)
            late_obs = env.move(ma_actions)
            late_actions = model.act(late_obs, 0.0, None)
            _, info = env.beamform(late_actions.get("bf"))
            obs = env.observe_moving()
            feasible.append(info["feasible"])
            if step >= config.n_step - tail:
                sums.append(info["sum_rate"])
                rxs.append(info["per_receiver"])
        scores.append(float(np.mean(sums)))
        per_rx.append(np.mean(rxs, axis=0))
    scores = np.array(scores)
    return {
        "mean": float(scores.mean()),
        "std": float(scores.std()),
        "episodes": episodes,
        "per_receiver": np.mean(per_rx, axis=0).tolist(),
        "feasible_rate": float(np.mean(feasible)),
        "scores": scores.tolist(),
    }
