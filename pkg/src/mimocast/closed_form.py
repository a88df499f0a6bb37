"""Closed-form effective SINR and achievable SE for every combination of
precoder (MRT, ZF) and traffic type (unicast, multicast).

The expressions are exact functions of the large-scale fading gains, the
channel-estimate variances, and the downlink power lists.  The total
transmitted powers appearing in the interference terms are always recomputed
from the power lists, never passed separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ZfInfeasibleError
from .model import EstimationStats, FadingProfile, SystemConfig, require_valid

MRT = "mrt"
ZF = "zf"
PRECODERS = (MRT, ZF)

# Slack for the power-budget check: optimal allocations sum to the budget up
# to float rounding and must not be rejected.
_BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class DownlinkPowers:
    """Per-stream downlink powers: one entry per unicast UT and per group."""

    unicast: tuple[float, ...]
    multicast: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "unicast", tuple(float(p) for p in self.unicast))
        object.__setattr__(self, "multicast", tuple(float(q) for q in self.multicast))

    @property
    def p_unicast(self) -> float:
        return sum(self.unicast)

    @property
    def p_multicast(self) -> float:
        return sum(self.multicast)

    @property
    def total(self) -> float:
        return self.p_unicast + self.p_multicast

    @classmethod
    def equal_split(cls, p_unicast: float, n_unicast: int,
                    p_multicast: float, n_groups: int) -> "DownlinkPowers":
        return cls(
            unicast=(p_unicast / n_unicast,) * n_unicast if n_unicast else (),
            multicast=(p_multicast / n_groups,) * n_groups if n_groups else (),
        )


@dataclass(frozen=True)
class SeReport:
    """Achievable SEs (bits/s/Hz) and the SINRs they derive from."""

    prelog: float
    unicast_se: tuple[float, ...]
    multicast_se: tuple[tuple[float, ...], ...]
    unicast_sinr: tuple[float, ...]
    multicast_sinr: tuple[tuple[float, ...], ...]

    def min_multicast_se(self) -> float:
        return min(se for grp in self.multicast_se for se in grp)

    def weighted_sum_unicast_se(self, weights: Sequence[float]) -> float:
        return float(sum(a * se for a, se in zip(weights, self.unicast_se)))

    def to_dict(self) -> dict:
        return {
            "prelog": self.prelog,
            "unicast_se": list(self.unicast_se),
            "multicast_se": [list(g) for g in self.multicast_se],
            "unicast_sinr": list(self.unicast_sinr),
            "multicast_sinr": [list(g) for g in self.multicast_sinr],
        }


def _check_powers(cfg: SystemConfig, powers: DownlinkPowers):
    if len(powers.unicast) != cfg.n_unicast or len(powers.multicast) != cfg.n_groups:
        raise ValueError(f"power lists must have {cfg.n_unicast} unicast and "
                         f"{cfg.n_groups} multicast entries")
    if any(p < 0 for p in powers.unicast) or any(q < 0 for q in powers.multicast):
        raise ValueError("downlink powers must be non-negative")
    if powers.total > cfg.total_power * (1.0 + _BUDGET_RTOL):
        raise ValueError(f"downlink powers sum to {powers.total}, exceeding the "
                         f"budget {cfg.total_power}")


def require_zf_feasible(cfg: SystemConfig):
    if cfg.n_antennas <= cfg.n_streams:
        raise ZfInfeasibleError(
            f"zero-forcing needs N > G+U, got N={cfg.n_antennas} with "
            f"G+U={cfg.n_streams} streams (zero degrees of freedom left)")


def sinr_mrt_unicast(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                     powers: DownlinkPowers, m: int) -> float:
    """MRT unicast SINR: N*p*var / (1 + gain*(total transmitted power))."""
    _check_powers(cfg, powers)
    if not 0 <= m < cfg.n_unicast:
        raise IndexError(f"unicast index {m} out of range [0, {cfg.n_unicast})")
    num = cfg.n_antennas * powers.unicast[m] * stats.unicast_var[m]
    return num / (1.0 + fading.unicast_gains[m] * powers.total)


def sinr_mrt_multicast(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                       powers: DownlinkPowers, j: int, k: int) -> float:
    """MRT multicast SINR: N*q_j*var_jk / (1 + gain_jk*(total power))."""
    _check_powers(cfg, powers)
    if not 0 <= j < cfg.n_groups or not 0 <= k < cfg.group_sizes[j]:
        raise IndexError(f"multicast index ({j},{k}) out of range")
    num = cfg.n_antennas * powers.multicast[j] * stats.multicast_var[j][k]
    return num / (1.0 + fading.multicast_gains[j][k] * powers.total)


def sinr_zf_unicast(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                    powers: DownlinkPowers, m: int) -> float:
    """ZF unicast SINR: beamforming gain drops to N-G-U, interference keeps
    only the estimation-error part of the gain."""
    require_zf_feasible(cfg)
    _check_powers(cfg, powers)
    if not 0 <= m < cfg.n_unicast:
        raise IndexError(f"unicast index {m} out of range [0, {cfg.n_unicast})")
    dof = cfg.n_antennas - cfg.n_streams
    num = dof * powers.unicast[m] * stats.unicast_var[m]
    err = fading.unicast_gains[m] - stats.unicast_var[m]
    return num / (1.0 + err * powers.total)


def sinr_zf_multicast(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                      powers: DownlinkPowers, j: int, k: int) -> float:
    require_zf_feasible(cfg)
    _check_powers(cfg, powers)
    if not 0 <= j < cfg.n_groups or not 0 <= k < cfg.group_sizes[j]:
        raise IndexError(f"multicast index ({j},{k}) out of range")
    dof = cfg.n_antennas - cfg.n_streams
    num = dof * powers.multicast[j] * stats.multicast_var[j][k]
    err = fading.multicast_gains[j][k] - stats.multicast_var[j][k]
    return num / (1.0 + err * powers.total)


def se_from_sinr(prelog: float, sinr: float) -> float:
    """SE in bits/s/Hz; log1p keeps accuracy for SINR much below one."""
    return prelog * math.log1p(sinr) / math.log(2.0)


def se_report(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
              powers: DownlinkPowers, precoder: str) -> SeReport:
    """Assemble per-UT SEs from the four SINR kernels with the pilot prelog."""
    require_valid(cfg, fading)
    _check_powers(cfg, powers)
    if precoder not in PRECODERS:
        raise ValueError(f"unknown precoder {precoder!r}, expected one of {PRECODERS}")
    if precoder == ZF:
        require_zf_feasible(cfg)
        uni_kernel = sinr_zf_unicast
        mu_kernel = sinr_zf_multicast
    else:
        uni_kernel = sinr_mrt_unicast
        mu_kernel = sinr_mrt_multicast

    prelog = cfg.prelog
    uni_sinr = tuple(uni_kernel(cfg, stats, fading, powers, m)
                     for m in range(cfg.n_unicast))
    mu_sinr = tuple(tuple(mu_kernel(cfg, stats, fading, powers, j, k)
                          for k in range(cfg.group_sizes[j]))
                    for j in range(cfg.n_groups))
    return SeReport(
        prelog=prelog,
        unicast_se=tuple(se_from_sinr(prelog, s) for s in uni_sinr),
        multicast_se=tuple(tuple(se_from_sinr(prelog, s) for s in grp) for grp in mu_sinr),
        unicast_sinr=uni_sinr,
        multicast_sinr=mu_sinr,
    )
