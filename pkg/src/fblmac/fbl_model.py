"""AWGN channel model in the finite-blocklength regime.

Capacity and dispersion of a real AWGN link, the normalized margin
``chi = (n*C - b) / sqrt(n*V)`` and the resulting probability that a
length-``n`` codeword carrying ``b`` bits is decoded correctly, under
either the second-order normal approximation or the variant with the
``0.5*log2(n)`` third-order correction.

All rates are in bits per channel use and SNR is linear.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

LOG2E = math.log2(math.e)
_SQRT2 = math.sqrt(2.0)


class PcModel(str, enum.Enum):
    SECOND = "second"
    THIRD = "third"


@dataclass(frozen=True)
class ChannelParams:
    """One AWGN link. Build with :func:`make_channel`."""

    snr: float
    capacity: float = field(init=False)
    dispersion: float = field(init=False)

    def __post_init__(self):
        snr = self.snr
        if not (isinstance(snr, (int, float, np.floating)) and math.isfinite(snr) and snr > 0):
            raise DomainError(f"snr must be a positive finite number, got {snr!r}")
        object.__setattr__(self, "snr", float(snr))
        object.__setattr__(self, "capacity", 0.5 * math.log2(1.0 + snr))
        object.__setattr__(
            self,
            "dispersion",
            (snr / 2.0) * (snr + 2.0) / (snr + 1.0) ** 2 * LOG2E**2,
        )


def make_channel(snr: float) -> ChannelParams:
    return ChannelParams(snr)


@dataclass(frozen=True)
class CodeSpec:
    """Packet size ``k`` bits, blocklength ``n`` and batch multiplicity ``L``."""

    k: int
    n: int
    L: int = 1

    def __post_init__(self):
        for name in ("k", "n", "L"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def payload(self) -> int:
        return self.L * self.k


def q_function(x):
    """Gaussian tail probability ``Q(x) = 0.5*erfc(x/sqrt(2))``.

    Scalars go through :func:`math.erfc`, arrays through
    :func:`scipy.special.erfc`; both are rational-approximation erfc
    implementations accurate to a few ulp.
    """
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / _SQRT2)
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / _SQRT2)


def chi(b, n: int, channel: ChannelParams):
    """Normalized margin ``(n*C - b) / sqrt(n*V)``; ``b`` may be an array."""
    if np.ndim(b):
        b = np.asarray(b, dtype=float)
    return (n * channel.capacity - b) / math.sqrt(n * channel.dispersion)


def _margin(b, n, channel, model):
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    x = chi(b, n, channel)
    if PcModel(model) is PcModel.THIRD:
        x = x + 0.5 * math.log2(n) / math.sqrt(n * channel.dispersion)
    return x


def success_prob(b, n: int, channel: ChannelParams, model: PcModel = PcModel.SECOND):
    """Probability that ``b`` bits in ``n`` channel uses are decoded correctly."""
    return q_function(-_margin(b, n, channel, model))


def error_prob(b, n: int, channel: ChannelParams, model: PcModel = PcModel.SECOND):
    """Block error probability, the complement of :func:`success_prob`.

    Evaluated as ``Q(margin)`` directly so that small error probabilities
    keep their relative precision.
    """
    return q_function(_margin(b, n, channel, model))


def log_success_prob(b, n: int, channel: ChannelParams, model: PcModel = PcModel.SECOND):
    """``log(success_prob)`` without underflow in the deep tail."""
    out = special.log_ndtr(_margin(b, n, channel, model))
    return float(out) if np.ndim(out) == 0 else out
