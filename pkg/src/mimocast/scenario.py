"""Cell scenarios: random user placement on an annulus, distance-based
path-loss fading, and conversion of physical radio parameters to the
unit-noise normalization used everywhere else.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import FadingProfile, SystemConfig


@dataclass(frozen=True)
class CellGeometry:
    """Single-cell disc with an exclusion zone around the BS."""

    cell_radius: float = 500.0        # m
    exclusion_radius: float = 35.0    # m
    pathloss_exponent: float = 3.76
    attenuation_const: float = 10.0 ** -3.5

    def validate(self):
        if not (0.0 < self.exclusion_radius < self.cell_radius):
            raise ValueError(f"need 0 < exclusion_radius < cell_radius, got "
                             f"({self.exclusion_radius}, {self.cell_radius})")
        if self.pathloss_exponent <= 2.0:
            raise ValueError(f"pathloss_exponent must exceed 2, got {self.pathloss_exponent}")
        if self.attenuation_const <= 0.0:
            raise ValueError(f"attenuation_const must be positive, got {self.attenuation_const}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CellGeometry":
        return cls(**d)


@dataclass(frozen=True)
class RadioParams:
    """Physical radio parameters used only for normalization."""

    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -174.0
    tx_power_watts: float = 10.0

    def validate(self):
        if self.bandwidth_hz <= 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if self.tx_power_watts <= 0:
            raise ValueError(f"tx_power_watts must be positive, got {self.tx_power_watts}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RadioParams":
        return cls(**d)


@dataclass(frozen=True)
class Placement:
    """Polar user positions (radius m, angle rad) from one placement draw."""

    unicast: tuple[tuple[float, float], ...]
    multicast: tuple[tuple[tuple[float, float], ...], ...]

    def to_dict(self) -> dict:
        return {
            "unicast": [list(p) for p in self.unicast],
            "multicast": [[list(p) for p in grp] for grp in self.multicast],
        }


def pathloss(geometry: CellGeometry, distance_m: float, check_range: bool = True) -> float:
    """Distance-based channel gain: attenuation_const / distance^exponent."""
    if check_range and not (geometry.exclusion_radius <= distance_m <= geometry.cell_radius):
        raise ValueError(f"distance {distance_m} m outside the annulus "
                         f"[{geometry.exclusion_radius}, {geometry.cell_radius}]")
    return geometry.attenuation_const / distance_m ** geometry.pathloss_exponent


def _draw_polar(geometry: CellGeometry, rng: np.random.Generator, n: int) -> np.ndarray:
    # Uniform over area: radius is the sqrt of a uniform draw on squared radii.
    r2 = rng.uniform(geometry.exclusion_radius ** 2, geometry.cell_radius ** 2, size=n)
    r = np.sqrt(r2)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    return np.stack([r, theta], axis=1)


def place_users(geometry: CellGeometry,
                n_unicast: int,
                group_sizes: Sequence[int],
                rng_seed) -> tuple[FadingProfile, Placement]:
    """Drop UTs uniformly over the annulus and derive their fading gains.

    Same seed gives identical placements on every platform.  Angles are
    drawn but only distances feed the fading model.
    """
    geometry.validate()
    if n_unicast < 0 or any(k < 1 for k in group_sizes):
        raise ValueError("need n_unicast >= 0 and every group size >= 1")
    rng = np.random.default_rng(rng_seed)

    uni = _draw_polar(geometry, rng, n_unicast)
    groups = [_draw_polar(geometry, rng, k) for k in group_sizes]

    def gains(r):  # drawn radii are in range by construction
        return tuple((geometry.attenuation_const / r ** geometry.pathloss_exponent).tolist())

    profile = FadingProfile(
        unicast_gains=gains(uni[:, 0]),
        multicast_gains=tuple(gains(g[:, 0]) for g in groups),
    )
    placement = Placement(
        unicast=tuple((float(r), float(t)) for r, t in uni),
        multicast=tuple(tuple((float(r), float(t)) for r, t in g) for g in groups),
    )
    return profile, placement


def noise_power_w_per_hz(radio: RadioParams) -> float:
    """Noise PSD converted from dBm/Hz to W/Hz."""
    return 10.0 ** ((radio.noise_psd_dbm_hz - 30.0) / 10.0)


def normalize_powers(radio: RadioParams, cfg: SystemConfig) -> SystemConfig:
    """Convert a config holding physical powers into the unit-noise scale.

    ``cfg.total_power`` is read as watts and every energy cap as a
    watt-symbol product; all are divided by bandwidth * noise PSD.
    """
    radio.validate()
    scale = 1.0 / (radio.bandwidth_hz * noise_power_w_per_hz(radio))
    return dataclasses.replace(
        cfg,
        total_power=cfg.total_power * scale,
        unicast_energy_caps=tuple(e * scale for e in cfg.unicast_energy_caps),
        multicast_energy_caps=tuple(tuple(e * scale for e in row)
                                    for row in cfg.multicast_energy_caps),
    )


def default_energy_cap_physical(coherence_length: int) -> float:
    """Stock per-UT pilot energy budget: 0.1 W sustained over the interval."""
    return 0.1 * coherence_length


def default_normalized_config(n_antennas: int,
                              coherence_length: int,
                              n_unicast: int,
                              group_sizes: Sequence[int],
                              radio: RadioParams = RadioParams()) -> SystemConfig:
    """Build the stock normalized config: full power budget, stock pilot
    energy caps, unit weights, and the shortest feasible pilot length."""
    group_sizes = tuple(int(k) for k in group_sizes)
    e_phys = default_energy_cap_physical(coherence_length)
    cfg = SystemConfig(
        n_antennas=n_antennas,
        coherence_length=coherence_length,
        n_unicast=n_unicast,
        group_sizes=group_sizes,
        pilot_length=n_unicast + len(group_sizes),
        total_power=radio.tx_power_watts,
        unicast_energy_caps=(e_phys,) * n_unicast,
        multicast_energy_caps=tuple((e_phys,) * k for k in group_sizes),
        sse_weights=(1.0,) * n_unicast,
    )
    return normalize_powers(radio, cfg)
