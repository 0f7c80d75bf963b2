"""Compare the numba and pure-numpy kernel backends.

Each backend runs in its own interpreter because the choice is fixed at import
time by ``MOVANT_NUMBA``. Compilation happens in a warm-up call and is not
timed. Usage::

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from movant import rates
from movant._accel import backend
from movant.channel import CeeModel, realize_channel, sample_paths
from movant.config import ScenarioConfig
from movant.geometry import init_layout
from movant.maddpg import train
from movant.neural import Mlp

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)

def best(fn, n):
    fn()
    times = []
    for _ in range(n):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

critic = Mlp(64, 1, (64, 64), "identity", rng)
X = rng.standard_normal((64, 64))
G = rng.standard_normal((64, 1))

def mlp():
    for _ in range(100):
        critic.backward(critic.forward_cache(X), G)

cfg = ScenarioConfig()
cee = CeeModel.scaled_identity(2, (2, 2), 0.1)
real = realize_channel(rng, init_layout(rng, cfg), sample_paths(rng, cfg), cee)
W = np.sqrt(500.0) * np.eye(2, dtype=complex)
mc = lambda: rates.mc_rate(real.estimated, W, cee, 1.0, np.random.default_rng(1), 10_000)

small = ScenarioConfig(n_epi=3, n_step=100)
episode = lambda: train(small, 0)

out = {"backend": backend(),
       "mlp fwd+bwd x100 (batch 64)": best(mlp, repeat),
       "mc_rate 1e4 samples": best(mc, repeat),
       "DS training, 3 episodes": best(episode, max(1, repeat // 2))}
print(json.dumps(out))
"""


def run(flag, repeat):
    env = dict(os.environ, MOVANT_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run("1", args.repeat), run("0", args.repeat)
    print(f"{'workload':32s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:32s} {fast[key]:10.4f} {slow[key]:10.4f} {slow[key] / fast[key]:8.2f}x")


if __name__ == "__main__":
    main()
