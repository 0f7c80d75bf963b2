"""Acceptance checks behind ``movant validate``.

Each check returns a :class:`CheckResult`. The ``fast`` level shrinks sample
counts and training budgets so the whole suite runs in a few minutes; ``full``
uses the sizes the acceptance contract pins. Wall-clock limits are part of the
contract and count toward pass/fail at the full level.
"""

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import geometry, maddpg, rates
from .channel import CeeModel, realize_channel, sample_cee, sample_paths
from .config import ScenarioConfig
from .neural import Mlp
from .oracle import grid_search_positions, mrt_beamformer, refine

EVAL_SEED = 10_000


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0
    limit: float | None = None

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        lim = f" (limit {self.limit:.0f}s)" if self.limit else ""
        return f"[{status}] {self.name}: {self.detail} [{self.seconds:.1f}s{lim}]"


LEVELS = {
    "fast": dict(instances=20, mc_samples=1000, triples=10, trace_samples=50_000, zero_instances=10,
                 nets=20, refine_instances=2, seeds=(1,), n_epi=60, eval_episodes=20,
                 regions=(1.0, 2.0, 3.0, 4.0), smoke=(2, 10), enforce_time=False),
    "full": dict(instances=100, mc_samples=10_000, triples=10, trace_samples=100_000, zero_instances=50,
                 nets=20, refine_instances=5, seeds=(1, 2, 3), n_epi=None, eval_episodes=100,
                 regions=(1.0, 2.0, 3.0, 4.0), smoke=(5, 20), enforce_time=True),
}


class TrainingCache:
    """Trained models keyed by (config, seed) so checks can share runs."""

    def __init__(self):
        self._models = {}
        self.seconds = {}
        self.reused = 0.0  # training time of cache hits since the last reset

    def model(self, config, seed):
        key = (config.to_json(), seed)
        if key not in self._models:
            t = time.perf_counter()
            self._models[key] = maddpg.train(config, seed)[0]
            self.seconds[key] = time.perf_counter() - t
        else:
            self.reused += self.seconds[key]
        return self._models[key]


def _random_psd(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G @ G.conj().T / n


def _random_instance(rng, cfg, cee):
    layout = geometry.init_layout(rng, cfg)
    real = realize_channel(rng, layout, sample_paths(rng, cfg), cee)
    W = rng.standard_normal((cfg.N, cfg.K)) + 1j * rng.standard_normal((cfg.N, cfg.K))
    W *= np.sqrt(cfg.power / rates.power(W))
    return real, W


# -- 1 -------------------------------------------------------------------------------

def check_dominance(p, ub=rates.ub_rate, seed=1):
    """Per-receiver MC rate <= closed form + 3 SE in at least 99% of receiver-instances."""
    rng = np.random.default_rng(seed)
    cfg = ScenarioConfig()
    hits = total = 0
    excess = []
    for i in range(p["instances"]):
        nmse = (0.01, 0.1)[i % 2]
        cee = CeeModel.scaled_identity(cfg.N, cfg.M, nmse)
        real, W = _random_instance(rng, cfg, cee)
        u = ub(real.estimated, W, cee, cfg.sigma2).per_receiver
        mc = rates.mc_rate(real.estimated, W, cee, cfg.sigma2, rng, p["mc_samples"])
        for k in range(cfg.K):
            total += 1
            hits += mc.per_receiver[k] <= u[k] + 3 * mc.stderr[k]
            if mc.stderr[k] > 0:
                excess.append((mc.per_receiver[k] - u[k]) / mc.stderr[k])
    frac = hits / total
    return frac >= 0.99, f"{hits}/{total} receiver-instances within bound ({frac:.1%}); " \
                         f"median (mc - closed form)/SE = {np.median(excess):+.1f}"


# -- 2 -------------------------------------------------------------------------------

def check_trace_identity(p, seed=2):
    rng = np.random.default_rng(seed)
    N, M = 2, 2
    worst = 0.0
    for _ in range(p["triples"]):
        A, B = _random_psd(rng, M), _random_psd(rng, N)
        w = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        w /= np.linalg.norm(w)
        dH = sample_cee(rng, CeeModel([A], [B]), 0, (N, M), size=p["trace_samples"])
        d = np.einsum("sij,i->sj", dH.conj(), w)  # rows are (dH^H w)^T
        emp = np.einsum("si,sj->ij", d, d.conj()) / len(d)
        ref = np.real(np.trace(B @ np.outer(w, w.conj()))) * A.T
        worst = max(worst, np.linalg.norm(emp - ref) / np.linalg.norm(ref))
    return worst <= 0.05, f"worst Frobenius relative error {worst:.4f} (tolerance 0.05)"


# -- 3 -------------------------------------------------------------------------------

def check_zero_cee(p, seed=3):
    rng = np.random.default_rng(seed)
    cfg = ScenarioConfig(nmse=0.0)
    cee = CeeModel.scaled_identity(cfg.N, cfg.M, 0.0)
    worst = 0.0
    for _ in range(p["zero_instances"]):
        real, W = _random_instance(rng, cfg, cee)
        ref = rates.perfect_rate(real.estimated, W, cfg.sigma2).per_receiver
        u = rates.ub_rate(real.estimated, W, cee, cfg.sigma2).per_receiver
        mc = rates.mc_rate(real.estimated, W, cee, cfg.sigma2, rng, 10).per_receiver
        worst = max(worst, np.max(np.abs(u - ref)), np.max(np.abs(mc - ref)))
    return worst <= 1e-10, f"max deviation from perfect-CSI rate {worst:.2e} (tolerance 1e-10)"


# -- 4 -------------------------------------------------------------------------------

def gradient_check(rng, head, h=1e-5, floor=1e-6):
    """Max relative error of backward vs central differences on a random small net.

    Relative error is |a - n| / max(|a|, |n|, floor); the floor only matters for
    entries whose true gradient is numerically zero.
    """
    n_in, n_out = rng.integers(2, 7), rng.integers(1, 5)
    hidden = tuple(int(x) for x in rng.integers(3, 9, size=2))
    net = Mlp(n_in, n_out, hidden, head, rng)
    X = rng.standard_normal((3, n_in))
    G = rng.standard_normal((3, n_out))

    def loss(theta, x=X):
        saved = net.theta
        net.theta = theta
        try:
            return float(np.sum(G * net.forward(x)))
        finally:
            net.theta = saved

    grad, gx = net.backward(net.forward_cache(X), G)
    num = np.empty_like(net.theta)
    for i in range(net.n_params):
        e = np.zeros_like(net.theta)
        e[i] = h
        num[i] = (loss(net.theta + e) - loss(net.theta - e)) / (2 * h)
    num_x = np.empty_like(X)
    for idx in np.ndindex(X.shape):
        e = np.zeros_like(X)
        e[idx] = h
        num_x[idx] = (loss(net.theta, X + e) - loss(net.theta, X - e)) / (2 * h)
    a = np.concatenate([grad, gx.ravel()])
    n = np.concatenate([num, num_x.ravel()])
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


def check_gradients(p, seed=4):
    rng = np.random.default_rng(seed)
    errs = [gradient_check(rng, ("tanh", "identity")[i % 2]) for i in range(p["nets"])]
    worst = max(errs)
    return worst <= 1e-4, f"{len(errs)} nets, worst relative error {worst:.2e} (tolerance 1e-4)"


# -- 5 -------------------------------------------------------------------------------

def check_oracle(p, seed=5):
    rng = np.random.default_rng(seed)
    siso = ScenarioConfig(K=1, N=1, M=1, L=1, nmse=0.0)
    zero = CeeModel.scaled_identity(1, (1,), 0.0)
    paths = sample_paths(rng, siso)
    res = grid_search_positions(paths, zero, siso, 9, mrt_beamformer)
    spread = float(res.rates.max() - res.rates.min())

    two = ScenarioConfig(K=1, N=2, M=1, L=2, nmse=0.0)
    zero2 = CeeModel.scaled_identity(2, (1,), 0.0)
    monotone = 0
    for _ in range(p["refine_instances"]):
        paths = sample_paths(rng, two)
        coarse = grid_search_positions(paths, zero2, two, 3, mrt_beamformer, movable=[0])
        fine = grid_search_positions(paths, zero2, two, refine(3), mrt_beamformer, movable=[0])
        monotone += fine.sum_rate >= coarse.sum_rate
    ok = spread <= 1e-10 and monotone == p["refine_instances"]
    return ok, f"SISO 9x9 spread {spread:.1e} over {res.count} layouts; " \
               f"refinement monotone on {monotone}/{p['refine_instances']} instances"


# -- 6, 7, 8 -------------------------------------------------------------------------

def _train_config(p, **kw):
    cfg = ScenarioConfig(**kw)
    return cfg.replace(n_epi=p["n_epi"]) if p["n_epi"] else cfg


def _best_of_seeds(cache, p, cfg):
    scores = []
    for s in p["seeds"]:
        model = cache.model(cfg, s)
        scores.append(maddpg.evaluate(model, cfg, p["eval_episodes"], EVAL_SEED)["mean"])
    return max(scores), scores


def check_training_ordering(p, cache):
    best = {}
    for scheme in ("FPA", "RMA", "DS"):
        best[scheme], _ = _best_of_seeds(cache, p, _train_config(p, scheme=scheme))
    ds, rma, fpa = best["DS"], best["RMA"], best["FPA"]
    ok = ds >= 1.10 * fpa and ds >= rma >= 0.95 * fpa
    return ok, f"best-of-{len(p['seeds'])} DS {ds:.3f}, RMA {rma:.3f}, FPA {fpa:.3f} " \
               f"(DS/FPA {ds / fpa:.3f}, RMA/FPA {rma / fpa:.3f})"


def check_region_trend(p, cache):
    means = {a: _best_of_seeds(cache, p, _train_config(p, scheme="DS", region=a))[0]
             for a in p["regions"]}
    m = [means[a] for a in (1.0, 2.0, 3.0, 4.0)]
    ok = m[2] >= m[0] and (m[3] - m[2]) <= (m[1] - m[0])
    return ok, "DS best-of-seeds by A: " + ", ".join(f"{a:g}: {v:.3f}" for a, v in means.items())


def check_cee_degradation(p, cache):
    cfg = _train_config(p, scheme="DS")
    model = cache.model(cfg, p["seeds"][0])
    noisy = maddpg.evaluate(model, cfg.replace(nmse=0.1), p["eval_episodes"], EVAL_SEED)["mean"]
    clean = maddpg.evaluate(model, cfg.replace(nmse=0.0), p["eval_episodes"], EVAL_SEED)["mean"]
    return noisy < clean, f"sum-rate at nmse 0.1: {noisy:.3f}, at nmse 0: {clean:.3f}"


# -- 9 -------------------------------------------------------------------------------

def check_determinism(p, seed=9):
    from .cli import run_train

    n_epi, n_step = p["smoke"]
    cfg = ScenarioConfig(n_epi=n_epi, n_step=n_step, batch_size=8)
    with tempfile.TemporaryDirectory() as tmp:
        outs = [os.path.join(tmp, name) for name in ("a", "b")]
        for out in outs:
            run_train(cfg, seed, out)
        same = []
        for name in ("train.csv", "checkpoint.bin"):
            blobs = [open(os.path.join(out, name), "rb").read() for out in outs]
            same.append(blobs[0] == blobs[1])
    return all(same), f"train.csv identical: {same[0]}, checkpoint.bin identical: {same[1]}"


CHECKS = [
    ("dominance", check_dominance, 120.0, False),
    ("trace_identity", check_trace_identity, 60.0, False),
    ("zero_cee", check_zero_cee, None, False),
    ("gradients", check_gradients, None, False),
    ("oracle_invariance", check_oracle, None, False),
    ("training_ordering", check_training_ordering, 1800.0, True),
    ("region_trend", check_region_trend, 3600.0, True),
    ("cee_degradation", check_cee_degradation, None, True),
    ("determinism", check_determinism, None, False),
]


def run_checks(level="fast", only=None, cache=None, overrides=None):
    """Yield one :class:`CheckResult` per selected check, in contract order.

    ``overrides`` maps a check name to a replacement callable with the same
    signature, which is how the negative control swaps in a tampered rate.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    p = LEVELS[level]
    cache = cache or TrainingCache()
    overrides = overrides or {}
    for name, fn, limit, trains in CHECKS:
        if only and name not in only:
            continue
        fn = overrides.get(name, fn)
        cache.reused = 0.0
        t = time.perf_counter()
        ok, detail = fn(p, cache) if trains else fn(p)
        # runs shared with earlier checks still count toward this one's budget
        dt = time.perf_counter() - t + cache.reused
        if limit and p["enforce_time"] and dt > limit:
            ok = False
            detail += "; exceeded time limit"
        yield CheckResult(name, bool(ok), detail, dt, limit)

