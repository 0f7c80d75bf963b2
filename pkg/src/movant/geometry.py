"""Movement regions, antenna layouts and constraint measurement.

Every region is the square [0, A]^2 in its own local plane. Minimum spacing
applies only between antennas of the same array.
"""

from dataclasses import dataclass

import numpy as np

MIN_SPACING = 0.5  # lambda / 2
MAX_ATTEMPTS = 100_000


class RegionTooSmall(RuntimeError):
    pass


@dataclass(frozen=True)
class Region:
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("region side must be positive")


@dataclass
class AntennaLayout:
    tx: np.ndarray  # (N, 2)
    rx: list  # K arrays of shape (M_k, 2)

    def arrays(self):
        """All arrays in agent order: transmitter first, then receivers."""
        return [self.tx, *self.rx]

    def copy(self):
        return AntennaLayout(self.tx.copy(), [r.copy() for r in self.rx])

    def to_dict(self):
        return {"tx": self.tx.tolist(), "rx": [r.tolist() for r in self.rx]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["tx"], dtype=float), [np.asarray(r, dtype=float) for r in d["rx"]])

    def __eq__(self, other):
        if not isinstance(other, AntennaLayout) or len(self.rx) != len(other.rx):
            return NotImplemented
        return np.array_equal(self.tx, other.tx) and all(
            np.array_equal(a, b) for a, b in zip(self.rx, other.rx))


@dataclass(frozen=True)
class FeasibilityReport:
    min_distance_violation: float
    region_violation: float

    @property
    def feasible(self):
        return self.min_distance_violation == 0.0 and self.region_violation == 0.0


def spacing_violation(points, min_spacing=MIN_SPACING):
    """Sum over unordered pairs of max(0, min_spacing - distance)."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(len(points), k=1)
    return float(np.sum(np.maximum(0.0, min_spacing - dist[iu])))


def region_distance(points, region):
    """Sum of Euclidean distances from each point to the square [0, side]^2."""
    points = np.asarray(points, dtype=float)
    side = region.side if isinstance(region, Region) else float(region)
    outside = np.maximum(0.0, -points) + np.maximum(0.0, points - side)
    return float(np.sum(np.sqrt(np.sum(outside * outside, axis=-1))))


def measure_feasibility(layout, regions):
    """Constraint violations of a layout.

    ``regions`` is a single :class:`Region` shared by all arrays or a sequence
    with one region per array (transmitter first).
    """
    arrays = layout.arrays()
    if isinstance(regions, (Region, int, float)):
        regions = [regions] * len(arrays)
    spacing = sum(spacing_violation(a) for a in arrays)
    outside = sum(region_distance(a, r) for a, r in zip(arrays, regions))
    return FeasibilityReport(spacing, outside)


def clamp_to_region(point, region):
    side = region.side if isinstance(region, Region) else float(region)
    return np.clip(np.asarray(point, dtype=float), 0.0, side)


def fpa_positions(count):
    """Uniform lambda/2 line along x starting at the region origin."""
    pos = np.zeros((count, 2))
    pos[:, 0] = MIN_SPACING * np.arange(count)
    return pos


def _random_array(rng, count, side):
    if count >= 2 and side * np.sqrt(2.0) < MIN_SPACING:
        raise RegionTooSmall(f"RegionTooSmall: {count} antennas cannot keep lambda/2 in a {side} square")
    for _ in range(MAX_ATTEMPTS):
        pts = rng.uniform(0.0, side, size=(count, 2))
        if spacing_violation(pts) == 0.0:
            return pts
    raise RegionTooSmall(f"RegionTooSmall: no feasible draw of {count} antennas in {MAX_ATTEMPTS} attempts")


def init_layout(rng, config, scheme="random-feasible"):
    """Initial antenna positions.

    ``random-feasible`` rejection-samples uniform positions for every array;
    ``fpa-grid`` puts each array on the fixed lambda/2 line.
    """
    if scheme == "fpa-grid":
        return AntennaLayout(fpa_positions(config.N), [fpa_positions(m) for m in config.M])
    if scheme != "random-feasible":
        raise ValueError(f"unknown layout scheme {scheme!r}")
    side = config.region
    tx = _random_array(rng, config.N, side)
    rx = [_random_array(rng, m, side) for m in config.M]
    return AntennaLayout(tx, rx)
