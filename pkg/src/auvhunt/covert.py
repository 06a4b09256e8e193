"""Target-side detection model and the covertness budget.

The eavesdropping target runs an optimal power-threshold test over a
block of channel uses; covertness of the hunters' communication is
operationalized as a KL-divergence budget ``D(Q0 || Q1) <= 2 * eps**2``.
Since transmit power, frequency and jam power are held constant, the
budget depends on geometry only through the hunter-target distance, which
makes the minimum covert distance a well-posed bisection problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .acoustics import ChannelParams, path_loss_linear

__all__ = [
    "CovertParams",
    "DetectionSnapshot",
    "NeverCovertError",
    "snr_beta",
    "optimal_threshold",
    "kl_budget",
    "is_covert",
    "covert_bound",
    "min_covert_distance",
    "simulate_detection",
    "detection_snapshot",
]


class NeverCovertError(ValueError):
    """The covertness bound cannot be met anywhere in the searched range."""


@dataclass(frozen=True)
class CovertParams:
    """Covert link budget parameters.

    :param p_s: transmit power of the hunter formation, watts
    :param n_j: jam power directed at the target, watts
    :param l_uses: channel uses per detection block
    :param epsilon: covertness tolerance, in (0, 0.5)
    """

    p_s: float = 0.1
    n_j: float = 0.2
    l_uses: int = 100
    epsilon: float = 0.04

    def __post_init__(self):
        if self.p_s <= 0:
            raise ValueError("transmit power must be positive")
        if self.n_j < 0:
            raise ValueError("jam power must be non-negative")
        if self.l_uses < 1:
            raise ValueError("channel uses must be >= 1")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must be in (0, 0.5)")


@dataclass(frozen=True)
class DetectionSnapshot:
    """One audited time step of the target's detection problem."""

    beta_t: float
    n_total: float
    threshold: float
    kl: float
    covert_ok: bool

    def __post_init__(self):
        if self.beta_t < 0 or self.kl < 0:
            raise ValueError("beta and kl must be non-negative")


def snr_beta(p_s: float, path_loss_linear: float, n_total: float) -> float:
    """Received SNR at the target: ``p_s / (A * n_total)``."""
    if p_s <= 0 or path_loss_linear <= 0 or n_total <= 0:
        raise ValueError("snr_beta requires positive power, loss and noise")
    return p_s / (path_loss_linear * n_total)


def optimal_threshold(n_total: float, beta: float) -> float:
    """Optimal mean-power decision threshold for the target's test.

    ``alpha* = N_T * (1 + 1/beta) * ln(1 + beta)``; tends to ``N_T`` as
    ``beta -> 0`` and is bracketed by ``(N_T, N_T * (1 + beta))``.
    """
    if n_total <= 0:
        raise ValueError("total noise must be positive")
    if beta <= 0:
        raise ValueError("beta must be positive (the beta->0 limit is n_total)")
    return n_total * (1.0 + 1.0 / beta) * math.log1p(beta)


def kl_budget(beta: float, l_uses: int) -> float:
    """KL divergence between the no-communication and communication
    distributions over a block of ``l_uses`` channel uses.

    ``D = (L/2) * [ln(1 + beta) - beta / (1 + beta)]``; zero at beta = 0,
    strictly increasing in beta and linear in L.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return 0.5 * l_uses * (math.log1p(beta) - beta / (1.0 + beta))


def covert_bound(epsilon: float) -> float:
    """The KL budget ceiling ``2 * epsilon**2``."""
    return 2.0 * epsilon * epsilon


def is_covert(kl: float, epsilon: float) -> bool:
    """Whether a KL value satisfies the covertness constraint.

    The bound is non-strict: ``kl == 2 * eps**2`` counts as covert.
    """
    if kl < 0:
        raise ValueError("kl must be non-negative")
    return kl <= covert_bound(epsilon)


def kl_at_distance(d_m: float, cp: CovertParams, channel: ChannelParams, n_u: float) -> float:
    """KL budget at hunter-target distance ``d_m`` meters.

    ``n_u`` is the ambient noise power in watts; the total noise seen by
    the target is ``n_u + n_j``.
    """
    if d_m <= 0:
        raise ValueError("distance must be positive")
    a = path_loss_linear(d_m / 1000.0, channel)
    beta = snr_beta(cp.p_s, a, n_u + cp.n_j)
    return kl_budget(beta, cp.l_uses)


def min_covert_distance(
    cp: CovertParams,
    channel: ChannelParams,
    n_u: float,
    d_max: float = 10_000.0,
    tol: float = 1e-3,
) -> float:
    """Smallest distance in meters at which the covertness bound holds.

    Path loss is strictly increasing in distance, so the KL budget is
    strictly decreasing and bisection on ``[d_lo, d_max]`` converges.
    Raises :class:`NeverCovertError` when even ``d_max`` (default 10 km;
    pass the arena diagonal to ask about a specific arena) violates the
    bound.
    """
    bound = covert_bound(cp.epsilon)
    if kl_at_distance(d_max, cp, channel, n_u) > bound:
        raise NeverCovertError(
            f"kl at {d_max:.0f} m exceeds the 2*eps^2 bound; never covert in range"
        )
    d_lo = 1e-6
    if kl_at_distance(d_lo, cp, channel, n_u) <= bound:
        return 0.0
    d_hi = d_max
    while d_hi - d_lo > tol:
        mid = 0.5 * (d_lo + d_hi)
        if kl_at_distance(mid, cp, channel, n_u) <= bound:
            d_hi = mid
        else:
            d_lo = mid
    return d_hi


def simulate_detection(
    truth: str,
    beta: float,
    cp: CovertParams,
    rng: np.random.Generator,
    n_total: float = 1.0,
    threshold: float | None = None,
) -> str:
    """Simulate one detection block at the target and return its decision.

    Under ``H1`` the received samples are the unit-power Gaussian-codebook
    signal scaled by the link gain plus noise, so their variance is
    ``n_total * (1 + beta)``; under ``H0`` they are noise alone.  The mean
    received power over ``l_uses`` complex samples is compared against the
    optimal threshold (or an explicit ``threshold`` override).

    The decision is scale-invariant in ``n_total``, so the default of 1 W
    loses no generality.
    """
    if truth not in ("H0", "H1"):
        raise ValueError("truth must be 'H0' or 'H1'")
    if beta <= 0 or n_total <= 0:
        raise ValueError("beta and n_total must be positive")
    var = n_total * (1.0 + beta) if truth == "H1" else n_total
    scale = math.sqrt(var / 2.0)
    re = rng.standard_normal(cp.l_uses) * scale
    im = rng.standard_normal(cp.l_uses) * scale
    y_mean_power = float(np.mean(re * re + im * im))
    alpha = optimal_threshold(n_total, beta) if threshold is None else threshold
    return "H1" if y_mean_power >= alpha else "H0"


def detection_snapshot(
    d_m: float, cp: CovertParams, channel: ChannelParams, n_u: float
) -> DetectionSnapshot:
    """Full detection-side audit of one hunter-target link distance."""
    if d_m <= 0:
        raise ValueError("distance must be positive")
    a = path_loss_linear(d_m / 1000.0, channel)
    n_total = n_u + cp.n_j
    beta = snr_beta(cp.p_s, a, n_total)
    kl = kl_budget(beta, cp.l_uses)
    return DetectionSnapshot(
        beta_t=beta,
        n_total=n_total,
        threshold=optimal_threshold(n_total, beta),
        kl=kl,
        covert_ok=is_covert(kl, cp.epsilon),
    )
