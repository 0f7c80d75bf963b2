import math

import numpy as np
import pytest

from movant import maddpg
from movant.config import ScenarioConfig
from movant.maddpg import Maddpg, NoEpisodes, ReplayBuffer, evaluate, select_action, train

SMOKE = dict(n_epi=2, n_step=10, batch_size=8)


def test_buffer_fifo_and_sampling():
    buf = ReplayBuffer(3, 2, 1)
    with pytest.raises(ValueError):
        buf.sample(np.random.default_rng(0), 1)
    for i in range(5):
        buf.add(np.full(2, i), [i], float(i), np.full(2, i + 1))
    assert len(buf) == 3
    assert sorted(buf.rew.tolist()) == [2.0, 3.0, 4.0]
    obs, act, rew, nxt = buf.sample(np.random.default_rng(0), 3)
    np.testing.assert_array_equal(obs[:, 0], rew)
    np.testing.assert_array_equal(nxt[:, 0], rew + 1)


@pytest.mark.parametrize("scheme,algorithm,count", [
    ("DS", "heterogeneous", 4), ("RMA", "heterogeneous", 3), ("FPA", "heterogeneous", 1), ("DS", "TR", 3)])
def test_agent_counts_and_critic_inputs(scheme, algorithm, count):
    cfg = ScenarioConfig(scheme=scheme, algorithm=algorithm)
    m = Maddpg(cfg, np.random.default_rng(0))
    assert len(m.agents) == count
    joint = sum(a.info.obs_dim + a.info.act_dim for a in m.agents)
    assert all(a.critic.sizes[0] == joint for a in m.agents)
    assert len({id(a.buffer) for a in m.agents}) == count


def test_select_action_noise():
    m = Maddpg(ScenarioConfig(), np.random.default_rng(0))
    ag = m["bf"]
    obs = np.random.default_rng(1).standard_normal(ag.info.obs_dim)
    np.testing.assert_array_equal(select_action(ag, obs, 0.0, None), ag.actor.forward(obs))
    a1 = select_action(ag, obs, 5.0, np.random.default_rng(2))
    a2 = select_action(ag, obs, 5.0, np.random.default_rng(2))
    assert np.array_equal(a1, a2)
    assert np.all(np.abs(a1) <= 1.0) and np.any(np.abs(a1) == 1.0)


def fill(model, n=16, seed=0):
    r = np.random.default_rng(seed)
    for ag in model.agents:
        for _ in range(n):
            ag.buffer.add(r.standard_normal(model.obs_dim), r.uniform(-1, 1, model.act_dim),
                          r.standard_normal(), r.standard_normal(model.obs_dim))


def test_critic_target_is_reward_when_gamma_zero():
    cfg = ScenarioConfig(scheme="FPA", gamma=0.0)
    m = Maddpg(cfg, np.random.default_rng(0))
    ag = m["bf"]
    ag.critic.theta[:] = 0.0
    ag.critic_target.theta[:] = 0.0
    fill(m)
    batch = ag.buffer.sample(np.random.default_rng(1), 8)
    assert m.critic_update(ag, batch) == pytest.approx(np.mean(batch[2] ** 2))


def test_critic_loss_constant_with_zero_lr():
    m = Maddpg(ScenarioConfig(scheme="FPA", lr_critic=0.0), np.random.default_rng(0))
    fill(m)
    ag = m["bf"]
    batch = ag.buffer.sample(np.random.default_rng(1), 8)
    assert m.critic_update(ag, batch) == m.critic_update(ag, batch)


def test_constant_critic_leaves_actor():
    m = Maddpg(ScenarioConfig(scheme="FPA", action_reg=0.0), np.random.default_rng(0))
    fill(m)
    ag = m["bf"]
    ag.critic.theta[:] = 0.0
    ag.critic.theta[-1] = 2.5  # output bias only
    before = ag.actor.theta.copy()
    targets = ag.actor_target.theta.copy(), ag.critic_target.theta.copy()
    obj = m.actor_update(ag, ag.buffer.sample(np.random.default_rng(1), 8))
    assert obj == pytest.approx(2.5)
    np.testing.assert_array_equal(ag.actor.theta, before)
    assert np.array_equal(ag.actor_target.theta, targets[0]) and np.array_equal(ag.critic_target.theta, targets[1])


def test_smoke_training():
    cfg = ScenarioConfig(**SMOKE)
    model, log = train(cfg, 0)
    assert len(log.rows) == 20
    assert all(len(a.buffer) == 20 for a in model.agents)
    for name in log.columns:
        col = log.column(name)
        if name in ("critic_loss", "actor_objective"):
            col = col[~np.isnan(col)]
            assert len(col) > 0
        assert np.all(np.isfinite(col))


def test_fpa_smoke_is_single_agent():
    model, log = train(ScenarioConfig(scheme="FPA", **SMOKE), 0)
    assert [a.name for a in model.agents] == ["bf"]
    assert log.columns[3] == "reward_bf"
    assert np.all(log.column("blp") == 0) and np.all(log.column("msp") == 0)


def test_tr_smoke():
    model, log = train(ScenarioConfig(algorithm="TR", **SMOKE), 1)
    assert [a.name for a in model.agents] == ["tr_tx", "tr_rx0", "tr_rx1"]
    assert np.all(np.isfinite(log.column("sum_rate")))


def test_zero_learning_rates_freeze_parameters():
    cfg = ScenarioConfig(lr_actor=0.0, lr_critic=0.0, tau=0.0, **SMOKE)
    fresh = Maddpg(cfg, maddpg.substreams(3)["networks"])
    trained, _ = train(cfg, 3)
    for a, b in zip(fresh.agents, trained.agents):
        for part in ("actor", "critic", "actor_target", "critic_target"):
            assert getattr(a, part).theta.tobytes() == getattr(b, part).theta.tobytes()


def test_targets_track_after_updates():
    model, _ = train(ScenarioConfig(**SMOKE), 2)
    from movant.neural import soft_update
    for ag in model.agents:
        assert ag.actor_target.same_shape(ag.actor)
        soft_update(ag.actor_target, ag.actor, 1.0)
        assert np.array_equal(ag.actor_target.theta, ag.actor.theta)


def test_noise_schedule():
    cfg = ScenarioConfig()
    assert maddpg.noise_at(cfg, 0) == 0.2
    assert maddpg.noise_at(cfg, 10**6) == 0.01
    assert maddpg.noise_at(cfg, 1) == pytest.approx(0.2 * 0.999)


def test_evaluate_zero_actor_fpa():
    cfg = ScenarioConfig(scheme="FPA", n_step=10)
    m = Maddpg(cfg, np.random.default_rng(0))
    for ag in m.agents:
        ag.actor.theta[:] = 0.0
    res = evaluate(m, cfg, 3, 0)
    assert res["mean"] == pytest.approx(0.0, abs=1e-12)
    assert res["feasible_rate"] == 1.0


def test_evaluate_deterministic_and_errors():
    cfg = ScenarioConfig(n_step=10)
    m = Maddpg(cfg, np.random.default_rng(0))
    assert evaluate(m, cfg, 2, 5) == evaluate(m, cfg, 2, 5)
    with pytest.raises(NoEpisodes, match="NoEpisodes"):
        evaluate(m, cfg, 0, 5)


def test_checkpoint_roundtrip(tmp_path):
    cfg = ScenarioConfig(**SMOKE)
    model, _ = train(cfg, 4)
    path = tmp_path / "ck.bin"
    model.save(path)
    back = Maddpg.load(path)
    for a, b in zip(model.agents, back.agents):
        assert a.actor.theta.tobytes() == b.actor.theta.tobytes()
        assert a.critic_target.theta.tobytes() == b.critic_target.theta.tobytes()
    assert evaluate(model, cfg, 1, 0) == evaluate(back, cfg, 1, 0)
    with pytest.raises(ValueError, match="do not match"):
        Maddpg.load(path, cfg.replace(scheme="FPA"))
    with pytest.raises(ValueError, match="shape mismatch"):
        Maddpg.load(path, cfg.replace(hidden=(32, 32)))


@pytest.mark.slow
def test_ds_policy_beats_zero_policy():
    cfg = ScenarioConfig(n_epi=60)
    model, _ = train(cfg, 1)
    trained = evaluate(model, cfg, 20, 77)["mean"]
    zero = Maddpg(cfg, np.random.default_rng(0))
    for ag in zero.agents:
        ag.actor.theta[:] = 0.0
    assert trained > evaluate(zero, cfg, 20, 77)["mean"]
    assert math.isfinite(trained)
