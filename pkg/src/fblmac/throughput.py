"""Throughput of the TDMA protocols and its maximization over ``k`` and ``L``.

Protocols:

* ``NC``         sources talk to the destination only.
* ``CC``         cognitive cooperation; the relay forwards overheard packets
                 in slots where the scheduled source is idle.
* ``BAF_RELAY``  CC with the relay batching ``L`` packets per codeword.
* ``BAF_SOURCE`` CC with the sources batching ``L`` packets per codeword.

Every throughput is in bits per channel use.  Functions accept a scalar or
an integer array for ``k`` so grids can be evaluated in one call.

For the batched variants two relay-arm expressions are available through
``relay_arm``: ``PUBLISHED`` is the standard closed form and the default;
``REDERIVED`` follows from requiring each relay queue's packet arrival
rate to stay below its packet service capacity.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fbl_model import ChannelParams, PcModel, error_prob, make_channel, success_prob


class Protocol(str, enum.Enum):
    NC = "nc"
    CC = "cc"
    BAF_RELAY = "baf_relay"
    BAF_SOURCE = "baf_source"
    OVERALL = "overall"


class Binding(str, enum.Enum):
    SOURCE_LIMITED = "source"
    RELAY_LIMITED = "relay"
    NOT_APPLICABLE = "na"


class RelayArm(str, enum.Enum):
    PUBLISHED = "published"
    REDERIVED = "rederived"


@dataclass(frozen=True)
class LinkSet:
    sd: ChannelParams
    sr: ChannelParams
    rd: ChannelParams

    @classmethod
    def from_snrs(cls, sd: float, sr: float, rd: float) -> "LinkSet":
        return cls(make_channel(sd), make_channel(sr), make_channel(rd))

    @property
    def snrs(self) -> tuple[float, float, float]:
        return self.sd.snr, self.sr.snr, self.rd.snr


@dataclass(frozen=True)
class ThroughputResult:
    protocol: Protocol
    k_star: int
    l_star: int
    u_star: float
    binding: Binding


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _k(k):
    return np.asarray(k, dtype=float) if np.ndim(k) else float(k)


def _ratio(num, den):
    """``num/den`` with 0 where the denominator vanishes, plus that mask."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    degenerate = den <= 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    return out, degenerate


# --------------------------------------------------------------------------
# single link


def tdma_throughput(k, n: int, channel: ChannelParams, model: PcModel = PcModel.SECOND):
    return _out(_k(k) / n * success_prob(k, n, channel, model))


def optimize_k(n: int, channel: ChannelParams, model: PcModel = PcModel.SECOND) -> tuple[int, float]:
    """Smallest maximizer of ``tdma_throughput`` found by an ascending scan.

    The objective is log-concave in ``k``, so the scan stops at the first
    strict decrease.  A hard bound of ``10*max(1, ceil(nC))`` guarantees
    termination.
    """
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    bound = 10 * max(1, math.ceil(n * channel.capacity))
    best_k, best_u = 1, tdma_throughput(1, n, channel, model)
    for k in range(2, bound + 1):
        u = tdma_throughput(k, n, channel, model)
        if u < best_u:
            break
        if u > best_u:
            best_k, best_u = k, u
    return best_k, best_u


# --------------------------------------------------------------------------
# cooperative protocols


def _probs(payload, n, link, model):
    return success_prob(payload, n, link, model), error_prob(payload, n, link, model)


def nc_throughput(k, n: int, links: LinkSet, model: PcModel = PcModel.SECOND):
    return tdma_throughput(k, n, links.sd, model)


def source_service(k, n: int, links: LinkSet, model: PcModel = PcModel.SECOND):
    """Per-slot probability that a transmitted codeword leaves the source.

    ``P_sd + P_e,sd * P_sr``: it reaches the destination, or it misses the
    destination and reaches the relay.
    """
    psd, pesd = _probs(k, n, links.sd, model)
    return _out(psd + pesd * success_prob(k, n, links.sr, model))


def cc_throughput_flagged(k, n: int, links: LinkSet, model: PcModel = PcModel.SECOND):
    psd, pesd = _probs(k, n, links.sd, model)
    forward = pesd * success_prob(k, n, links.sr, model)
    prd = success_prob(k, n, links.rd, model)
    ratio, degenerate = _ratio((psd + forward) * prd, prd + forward)
    flag = degenerate if np.ndim(k) else bool(degenerate)
    return _out(_k(k) / n * ratio), flag


def cc_throughput(k, n: int, links: LinkSet, model: PcModel = PcModel.SECOND):
    """Cognitive-cooperation throughput; 0 where both relay terms vanish."""
    return cc_throughput_flagged(k, n, links, model)[0]


def baf_relay_arms(k, L: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND,
                   relay_arm: RelayArm = RelayArm.PUBLISHED):
    """(source arm, relay arm) of the relay-batching throughput.

    The source arm is the CC source throughput at payload ``k``; the relay
    arm evaluates the relay->destination link at payload ``L*k``.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    kk = _k(k)
    psd, pesd = _probs(k, n, links.sd, model)
    forward = pesd * success_prob(k, n, links.sr, model)
    served = psd + forward
    prd_l = success_prob(L * kk, n, links.rd, model)
    weight = 1.0 if RelayArm(relay_arm) is RelayArm.PUBLISHED else float(L)
    ratio, _ = _ratio(served * prd_l, weight * prd_l + forward)
    return _out(kk / n * served), _out(L * kk / n * ratio)


def baf_source_arms(k, L: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND,
                    relay_arm: RelayArm = RelayArm.PUBLISHED):
    """(source arm, relay arm) of the source-batching throughput.

    Source and source->relay links carry ``L*k`` bits; the relay forwards
    single packets of ``k`` bits.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    kk = _k(k)
    psd_l, pesd_l = _probs(L * kk, n, links.sd, model)
    forward = pesd_l * success_prob(L * kk, n, links.sr, model)
    served = psd_l + forward
    prd = success_prob(k, n, links.rd, model)
    if RelayArm(relay_arm) is RelayArm.PUBLISHED:
        ratio, _ = _ratio(served * prd, prd + forward)
        relay = kk / n * ratio
    else:
        ratio, _ = _ratio(served * prd, prd + L * forward)
        relay = L * kk / n * ratio
    return _out(L * kk / n * served), _out(relay)


def _min_with_binding(source, relay):
    u = np.minimum(source, relay)
    src = np.asarray(source) <= np.asarray(relay)
    if np.ndim(u) == 0:
        return float(u), Binding.SOURCE_LIMITED if src else Binding.RELAY_LIMITED
    # str-valued enums would be coerced to fixed-width strings by np.where
    binding = np.empty(src.shape, dtype=object)
    for idx, s in np.ndenumerate(src):
        binding[idx] = Binding.SOURCE_LIMITED if s else Binding.RELAY_LIMITED
    return u, binding


def baf_relay_throughput(k, L: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND,
                         relay_arm: RelayArm = RelayArm.PUBLISHED):
    """``min`` of the two arms and which one attains it."""
    return _min_with_binding(*baf_relay_arms(k, L, n, links, model, relay_arm))


def baf_source_throughput(k, L: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND,
                          relay_arm: RelayArm = RelayArm.PUBLISHED):
    return _min_with_binding(*baf_source_arms(k, L, n, links, model, relay_arm))


def baf_relay_printed_source_limited(k, L: int, n: int, links: LinkSet,
                                     model: PcModel = PcModel.SECOND) -> bool:
    """Published branch test ``L >= 1 + P_e,sd P_sr / P_rd(Lk)``."""
    forward = error_prob(k, n, links.sd, model) * success_prob(k, n, links.sr, model)
    prd_l = success_prob(L * k, n, links.rd, model)
    if prd_l == 0.0:
        return False
    return L >= 1.0 + forward / prd_l


def baf_source_printed_source_limited(k, L: int, n: int, links: LinkSet,
                                      model: PcModel = PcModel.SECOND) -> bool:
    """Published branch test ``L >= P_rd(Lk) / (P_rd(k) + P_e,sd(Lk) P_sr(Lk))``.

    Exposed only for comparison with the binding computed from the min.
    """
    forward = error_prob(L * k, n, links.sd, model) * success_prob(L * k, n, links.sr, model)
    den = success_prob(k, n, links.rd, model) + forward
    if den == 0.0:
        return True
    return L >= success_prob(L * k, n, links.rd, model) / den


# --------------------------------------------------------------------------
# grid optimization


def _best_on_grid(values: np.ndarray, best: tuple | None, protocol, L, bindings=None):
    i = int(np.argmax(values))
    u = float(values[i])
    if best is None or u > best[0]:
        b = Binding.NOT_APPLICABLE if bindings is None else Binding(bindings[i])
        return (u, i + 1, L, protocol, b)
    return best


def optimize_protocol(protocol: Protocol, n: int, links: LinkSet,
                      model: PcModel = PcModel.SECOND, k_max: int | None = None,
                      l_max: int = 8, relay_arm: RelayArm = RelayArm.PUBLISHED) -> ThroughputResult:
    """Exhaustive search over ``k in [1, k_max]`` and, for batching, ``L in [1, l_max]``.

    Ties go to the smallest ``(L, k)``.  ``OVERALL`` returns the better of
    the two batching variants (relay batching wins ties).
    """
    protocol = Protocol(protocol)
    k_max = n if k_max is None else k_max
    if n < 1 or k_max < 1 or l_max < 1:
        raise DomainError(f"empty search grid (n={n}, k_max={k_max}, l_max={l_max})")
    if protocol is Protocol.OVERALL:
        a = optimize_protocol(Protocol.BAF_RELAY, n, links, model, k_max, l_max, relay_arm)
        b = optimize_protocol(Protocol.BAF_SOURCE, n, links, model, k_max, l_max, relay_arm)
        return b if b.u_star > a.u_star else a

    k = np.arange(1, k_max + 1)
    best = None
    if protocol is Protocol.NC:
        best = _best_on_grid(nc_throughput(k, n, links, model), best, protocol, 1)
    elif protocol is Protocol.CC:
        best = _best_on_grid(cc_throughput(k, n, links, model), best, protocol, 1)
    else:
        arms = baf_relay_throughput if protocol is Protocol.BAF_RELAY else baf_source_throughput
        for L in range(1, l_max + 1):
            u, binding = arms(k, L, n, links, model, relay_arm)
            best = _best_on_grid(u, best, protocol, L, binding)
    u, k_star, l_star, proto, binding = best
    return ThroughputResult(proto, k_star, l_star, u, binding)
