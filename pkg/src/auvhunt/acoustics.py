"""Shallow-water acoustic path loss and ambient noise.

Path loss combines geometric spreading with Thorp's empirical per-km
attenuation; ambient noise sums turbulence, shipping, wind and thermal
components in the linear power domain.  Frequencies are in kHz and
distances in kilometers at this boundary; environment code divides its
meter distances by 1000 before calling in.

All functions are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ChannelParams",
    "NoiseLevels",
    "thorp_db_per_km",
    "path_loss_db",
    "path_loss_linear",
    "ambient_noise_db",
    "ambient_noise_watts",
    "db_to_linear",
    "linear_to_db",
]


@dataclass(frozen=True)
class ChannelParams:
    """Acoustic channel description.

    :param f: carrier frequency in kHz
    :param spreading_m: spreading factor (1 cylindrical .. 2 spherical)
    :param shipping_s: shipping activity factor in [0, 1]
    :param wind_w: wind speed in m/s
    :param bandwidth: receiver bandwidth in Hz
    :param reference_scale: calibration constant bridging the ambient
        noise level (dB re uPa^2/Hz) to a watt-scale power commensurable
        with the transmit and jam powers; a modeling choice, not physics
    """

    f: float = 25.0
    spreading_m: float = 1.5
    shipping_s: float = 0.5
    wind_w: float = 0.0
    bandwidth: float = 4000.0
    reference_scale: float = 1e-9

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError("frequency must be positive")
        if not 1.0 <= self.spreading_m <= 2.0:
            raise ValueError("spreading factor must be in [1, 2]")
        if not 0.0 <= self.shipping_s <= 1.0:
            raise ValueError("shipping factor must be in [0, 1]")
        if self.wind_w < 0:
            raise ValueError("wind speed must be non-negative")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.reference_scale <= 0:
            raise ValueError("reference scale must be positive")


@dataclass(frozen=True)
class NoiseLevels:
    """Ambient noise components and their linear-domain total, in dB re uPa^2/Hz."""

    turbulence: float
    shipping: float
    wind: float
    thermal: float
    total: float


def thorp_db_per_km(f: float) -> float:
    """Thorp attenuation coefficient in dB/km at frequency ``f`` in kHz.

    >>> round(thorp_db_per_km(25.0), 4)
    6.1207
    """
    if f <= 0:
        raise ValueError("frequency must be positive")
    f2 = f * f
    return 3.3e-3 + 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 3.0e-4 * f2


def path_loss_db(d: float, channel: ChannelParams) -> float:
    """Path loss in dB over ``d`` kilometers.

    Spreading contributes ``10 * m * lg(d)`` and absorption
    ``d * thorp_db_per_km(f)``; the equivalent linear form is
    ``d**m * a(f)**d``.  Negative values below 1 km are expected (the
    spreading term changes sign there).
    """
    if d <= 0:
        raise ValueError("distance must be positive")
    return 10.0 * channel.spreading_m * math.log10(d) + d * thorp_db_per_km(channel.f)


def path_loss_linear(d: float, channel: ChannelParams) -> float:
    """Linear path-loss ratio over ``d`` kilometers."""
    return db_to_linear(path_loss_db(d, channel))


def ambient_noise_db(channel: ChannelParams) -> NoiseLevels:
    """Ambient noise levels for the four standard sources plus their total.

    Components are turbulence, shipping (scaled by the activity factor
    ``s``), wind-driven waves (scaled by ``sqrt(w)``) and thermal noise.
    The total is formed in the linear power domain:
    ``10 * lg(sum_i 10**(N_i / 10))``.
    """
    f, s, w = channel.f, channel.shipping_s, channel.wind_w
    lg_f = math.log10(f)
    turbulence = 17.0 - 30.0 * lg_f
    shipping = 40.0 + 20.0 * (s - 0.5) + 26.0 * lg_f - 60.0 * math.log10(f + 0.03)
    wind = 50.0 + 7.5 * math.sqrt(w) + 20.0 * lg_f - 40.0 * math.log10(f + 0.4)
    thermal = -15.0 + 20.0 * lg_f
    total = linear_to_db(
        db_to_linear(turbulence) + db_to_linear(shipping) + db_to_linear(wind) + db_to_linear(thermal)
    )
    return NoiseLevels(turbulence, shipping, wind, thermal, total)


def ambient_noise_watts(channel: ChannelParams) -> float:
    """Ambient noise power in watts, via the documented calibration bridge.

    ``N_u = 10**(total_db / 10) * bandwidth * reference_scale``.  The
    reference scale is the single explicit stand-in for the unit gap
    between the dB-re-uPa noise level and the watt-scale transmit/jam
    powers.
    """
    return db_to_linear(ambient_noise_db(channel).total) * channel.bandwidth * channel.reference_scale


def db_to_linear(x: float) -> float:
    """Convert a decibel value to a linear power ratio."""
    if not math.isfinite(x):
        raise ValueError("decibel value must be finite")
    return 10.0 ** (x / 10.0)


def linear_to_db(x: float) -> float:
    """Convert a linear power ratio to decibels; rejects non-positive input."""
    if x <= 0:
        raise ValueError("linear value must be positive")
    return 10.0 * math.log10(x)
