"""Experiment configuration.

Lengths are in wavelengths throughout (lambda = 1), so the minimum antenna
spacing is 0.5 and the region side equals the normalised size A/lambda.
"""

import dataclasses
import json
import math
from dataclasses import dataclass

SCHEMES = ("DS", "RMA", "FPA")
ALGORITHMS = ("heterogeneous", "TR")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    # system
    K: int = 2
    N: int = 2
    M: tuple = (2, 2)
    L: tuple = (3, 3)
    region: float = 3.0
    snr_db: float = 30.0
    sigma2: float = 1.0
    nmse: float = 0.01
    los_var: float = 0.9
    nlos_var: float = 0.1
    angle_low: float = math.pi / 3
    angle_high: float = 2 * math.pi / 3
    # rewards and movement
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    delta: float | None = None
    scheme: str = "DS"
    algorithm: str = "heterogeneous"
    # learning
    n_epi: int = 300
    n_step: int = 100
    lr_actor: float = 0.01
    lr_critic: float = 0.01
    gamma: float = 0.95
    tau: float = 0.005
    batch_size: int = 64
    capacity: int = 100_000
    hidden: tuple = (64, 64)
    value_scale: float | None = None
    action_reg: float = 1e-3
    observe_positions: bool = True
    noise_init: float = 0.2
    noise_decay: float = 0.999
    noise_min: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # evaluation
    eval_tail: float = 0.2
    mc_samples: int = 10_000

    def __post_init__(self):
        # normalise scalar receiver counts into per-receiver tuples
        for name in ("M", "L"):
            value = getattr(self, name)
            if isinstance(value, int):
                value = (value,) * self.K
            object.__setattr__(self, name, tuple(int(v) for v in value))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        self.validate()

    @property
    def power(self):
        """Power budget P, with SNR = P / sigma^2."""
        return 10.0 ** (self.snr_db / 10.0) * self.sigma2

    @property
    def reward_scale(self):
        """Critics regress scaled targets; defaults to (1 - gamma) so Q stays on the reward scale."""
        return 1.0 - self.gamma if self.value_scale is None else self.value_scale

    @property
    def step_size(self):
        """Largest per-slot displacement along each axis (default A/10)."""
        return self.region / 10.0 if self.delta is None else self.delta

    def validate(self):
        errors = []

        def need(ok, name, msg):
            if not ok:
                errors.append(f"{name}: {msg}")

        need(self.K >= 1, "K", "must be >= 1")
        need(self.N >= 1, "N", "must be >= 1")
        need(len(self.M) == self.K, "M", f"needs {self.K} entries")
        need(all(m >= 1 for m in self.M), "M", "entries must be >= 1")
        need(len(self.L) == self.K, "L", f"needs {self.K} entries")
        need(all(l >= 1 for l in self.L), "L", "entries must be >= 1")
        need(self.region > 0, "region", "must be > 0")
        need(self.sigma2 > 0, "sigma2", "must be > 0")
        need(self.nmse >= 0, "nmse", "must be >= 0")
        need(self.delta is None or self.delta > 0, "delta", "must be > 0")
        need(self.scheme in SCHEMES, "scheme", f"must be one of {SCHEMES}")
        need(self.algorithm in ALGORITHMS, "algorithm", f"must be one of {ALGORITHMS}")
        need(not (self.algorithm == "TR" and self.scheme != "DS"), "algorithm",
             "TR wiring requires scheme DS")
        need(self.n_epi >= 1, "n_epi", "must be >= 1")
        need(self.n_step >= 1, "n_step", "must be >= 1")
        need(0 <= self.gamma < 1, "gamma", "must lie in [0, 1)")
        need(0 <= self.tau <= 1, "tau", "must lie in [0, 1]")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(self.capacity >= self.batch_size, "capacity", "must be >= batch_size")
        need(len(self.hidden) == 2 and all(h >= 1 for h in self.hidden), "hidden",
             "two positive layer widths")
        need(0 < self.eval_tail <= 1, "eval_tail", "must lie in (0, 1]")
        need(self.action_reg >= 0, "action_reg", "must be >= 0")
        need(self.mc_samples >= 1, "mc_samples", "must be >= 1")
        need(self.lr_actor >= 0 and self.lr_critic >= 0, "lr", "must be >= 0")
        if errors:
            raise ConfigError("; ".join(errors))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        for key in ("M", "L", "hidden"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(unknown))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)
