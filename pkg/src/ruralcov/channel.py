"""Air-to-ground and terrestrial downlink model.

Path loss is a plain power law, UAV links switch between LoS and NLoS
exponents/losses according to the elevation-angle sigmoid

    P_LoS(theta) = 1 / (1 + a * exp(-b * (theta - a)))      (theta in degrees)

and small-scale fading is Nakagami-m, i.e. unit-mean Gamma(m, 1/m) power gain.
The user associates with the strongest *average* received power given the
sampled LoS state; SINR then includes the fading realisations.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spatial import GroundPoint, elevation_angle_deg

TBS_MIN_DISTANCE = 1.0


class NoServerError(RuntimeError):
    """No active transmitter is available for association."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    env_a: float = 4.88
    env_b: float = 0.43
    alpha_los: float = 2.1
    alpha_nlos: float = 4.0
    alpha_tbs: float = 4.0
    m_los: float = 3.0
    m_nlos: float = 1.0
    m_tbs: float = 1.0
    eta_los: float = 1.0  # 0 dB
    eta_nlos: float = 0.01  # -20 dB
    rho_uav: float = 0.2
    rho_tbs: float = 10.0
    noise_power: float = 1e-9
    sinr_threshold: float = 1.0  # 0 dB

    def __post_init__(self):
        if not self.alpha_los > 0:
            raise ValueError("alpha_los must be > 0")
        for name in ("alpha_nlos", "alpha_tbs"):
            if not getattr(self, name) >= 2:
                raise ValueError(f"{name} must be >= 2")
        for name in ("m_los", "m_nlos", "m_tbs"):
            if not getattr(self, name) >= 0.5:
                raise ValueError(f"{name} must be >= 0.5")
        for name in ("eta_los", "eta_nlos"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("rho_uav", "rho_tbs", "noise_power", "sinr_threshold", "env_a", "env_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


class TxKind(enum.Enum):
    UAV = "uav"
    TBS = "tbs"


@dataclass(frozen=True)
class Transmitter:
    kind: TxKind
    location: GroundPoint
    altitude: float = 0.0
    active: bool = True

    def __post_init__(self):
        if self.kind is TxKind.UAV and not self.altitude > 0:
            raise ValueError("UAV altitude must be positive")
        if self.kind is TxKind.TBS and self.altitude != 0:
            raise ValueError("TBS altitude must be zero")

    def distance_3d(self, user: Sequence[float]) -> float:
        return math.hypot(self.location.distance_to(user), self.altitude)


@dataclass(frozen=True)
class LinkRealization:
    is_los: bool
    distance_3d: float
    fading_gain: float
    avg_rx_power: float


def los_probability(theta_deg, params: ChannelParams):
    theta = np.asarray(theta_deg, dtype=float)
    if np.any(theta < 0) or np.any(theta > 90):
        raise ValueError("elevation angle must lie in [0, 90] degrees")
    a, b = params.env_a, params.env_b
    p = 1.0 / (1.0 + a * np.exp(-b * (theta - a)))
    return float(p) if p.ndim == 0 else p


def sample_los_state(theta_deg, params: ChannelParams, rng: np.random.Generator):
    p = los_probability(theta_deg, params)
    u = rng.random(np.shape(p)) if np.ndim(p) else rng.random()
    return u < p


def sample_fading(shape_m: float, rng: np.random.Generator, size=None):
    """Unit-mean Nakagami-m power gain, Gamma(m, 1/m)."""
    if not shape_m >= 0.5:
        raise ValueError(f"Nakagami shape must be >= 0.5, got {shape_m}")
    return rng.gamma(shape_m, 1.0 / shape_m, size=size)


def mean_power(distance_3d, is_uav, is_los, params: ChannelParams):
    """Average received power (no fading) for arrays of links."""
    d = np.asarray(distance_3d, dtype=float)
    if (d <= 0).any():
        raise ValueError("link distance must be positive")
    is_uav = np.asarray(is_uav, dtype=bool)
    is_los = np.asarray(is_los, dtype=bool)
    uav_gain = np.where(is_los, params.rho_uav * params.eta_los, params.rho_uav * params.eta_nlos)
    gain = np.where(is_uav, uav_gain, params.rho_tbs)
    alpha = np.where(is_uav, np.where(is_los, params.alpha_los, params.alpha_nlos), params.alpha_tbs)
    d = np.where(is_uav, d, np.maximum(d, TBS_MIN_DISTANCE))
    return gain * d ** -alpha


def avg_rx_power(tx: Transmitter, user: Sequence[float], is_los: bool, params: ChannelParams) -> float:
    d = tx.distance_3d(user)
    if tx.kind is TxKind.TBS:
        d = max(d, TBS_MIN_DISTANCE)
    return float(mean_power(d, tx.kind is TxKind.UAV, is_los, params))


def sample_links(user: Sequence[float], transmitters: Sequence[Transmitter], params: ChannelParams,
                 rng: np.random.Generator) -> list[LinkRealization]:
    """One LoS state and fading gain per link, reused for association and SINR."""
    links = []
    for tx in transmitters:
        d3 = tx.distance_3d(user)
        if tx.kind is TxKind.UAV:
            theta = elevation_angle_deg(tx.location.distance_to(user), tx.altitude)
            los = bool(sample_los_state(theta, params, rng))
            m = params.m_los if los else params.m_nlos
        else:
            los, m = False, params.m_tbs
        gain = float(sample_fading(m, rng))
        links.append(LinkRealization(los, d3, gain, avg_rx_power(tx, user, los, params)))
    return links


def associate(transmitters: Sequence[Transmitter], links: Sequence[LinkRealization]) -> int:
    """Index of the active transmitter with the strongest average power.

    Ties go to the smaller 3-D distance, then the lower index.
    """
    best, best_key = None, None
    for i, (tx, link) in enumerate(zip(transmitters, links)):
        if not tx.active:
            continue
        key = (-link.avg_rx_power, link.distance_3d, i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    if best is None:
        raise NoServerError("no active transmitter")
    return best


def sinr(server: int, transmitters: Sequence[Transmitter], links: Sequence[LinkRealization],
         params: ChannelParams, interference: bool = True) -> float:
    if not transmitters[server].active:
        raise ValueError("serving transmitter is inactive")
    signal = links[server].avg_rx_power * links[server].fading_gain
    interf = 0.0
    if interference:
        interf = sum(link.avg_rx_power * link.fading_gain
                     for i, (tx, link) in enumerate(zip(transmitters, links))
                     if i != server and tx.active)
    return signal / (interf + params.noise_power)


def coverage_indicator(sinr_value: float, params: ChannelParams) -> bool:
    """Strict ``sinr > threshold``; equality counts as outage."""
    return bool(sinr_value > params.sinr_threshold)


# Vectorised path used by the scenario runners. ----------------------------

@dataclass
class LinkSnapshot:
    """Sampled links from one user to every transmitter, stored column-wise."""

    avg_power: np.ndarray
    distance_3d: np.ndarray
    fading: np.ndarray
    is_los: np.ndarray

    @property
    def rx_power(self) -> np.ndarray:
        return self.avg_power * self.fading


def sample_link_snapshot(user: Sequence[float], tx_xy: np.ndarray, tx_height: np.ndarray,
                         params: ChannelParams, rng: np.random.Generator) -> LinkSnapshot:
    """Array form of :func:`sample_links`. Transmitters with height 0 are TBSs."""
    tx_xy = np.asarray(tx_xy, dtype=float).reshape(-1, 2)
    tx_height = np.asarray(tx_height, dtype=float)
    horiz = np.hypot(tx_xy[:, 0] - user[0], tx_xy[:, 1] - user[1])
    d3 = np.hypot(horiz, tx_height)
    is_uav = tx_height > 0
    # arctan2 gives 0 for TBSs, whose LoS draw is masked out anyway
    theta = np.degrees(np.arctan2(tx_height, horiz))
    a, b = params.env_a, params.env_b
    p_los = 1.0 / (1.0 + a * np.exp(-b * (theta - a)))
    is_los = is_uav & (rng.random(len(d3)) < p_los)
    shape = np.where(is_uav, np.where(is_los, params.m_los, params.m_nlos), params.m_tbs)
    fading = rng.standard_gamma(shape) / shape
    return LinkSnapshot(mean_power(d3, is_uav, is_los, params), d3, fading, is_los)


def sinr_batch(snap: LinkSnapshot, active: np.ndarray, noise_power: float,
               interference: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per row of the ``(k, n_tx)`` activity mask: whether a server exists, and its SINR."""
    active = np.atleast_2d(np.asarray(active, dtype=bool))
    n = len(snap.avg_power)
    order = np.lexsort((np.arange(n), snap.distance_3d, -snap.avg_power))
    ranked = active[:, order]
    has_server = ranked.any(axis=1)
    server = order[np.argmax(ranked, axis=1)]
    rx = snap.rx_power
    signal = rx[server]
    if interference:
        others = active.copy()
        others[np.arange(len(server)), server] = False
        interf = others @ rx
    else:
        interf = 0.0
    return has_server, signal / (interf + noise_power)


def coverage_batch(snap: LinkSnapshot, active: np.ndarray, params: ChannelParams,
                   interference: bool = True) -> np.ndarray:
    """Coverage indicator for every row of the ``(k, n_tx)`` activity mask.

    Rows with no active transmitter are outages.
    """
    has_server, ratio = sinr_batch(snap, active, params.noise_power, interference)
    return has_server & (ratio > params.sinr_threshold)
