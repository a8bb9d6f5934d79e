"""Closed-form stability conditions for the TDMA protocols.

Verdicts are expressed on the arrival-rate scale (packets per slot): each
constraint is ``capacity - load`` and the network is stable when every
relevant margin is strictly positive.  Margins within ``STRICT_MARGIN`` of
zero are reported as 0 and classified unstable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DomainError, UnstableError
from .fbl_model import ChannelParams, PcModel, error_prob, success_prob
from .throughput import LinkSet, RelayArm, tdma_throughput

STRICT_MARGIN = 1e-9

SOURCE_A = "source_a"
SOURCE_B = "source_b"
SUM = "sum"
RELAY_A = "relay_a"
RELAY_B = "relay_b"
RELAY_SUM = "relay_sum"


@dataclass(frozen=True)
class TrafficProfile:
    lambda_a: float
    lambda_b: float
    omega_a: float = 0.5

    def __post_init__(self):
        for name in ("lambda_a", "lambda_b"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise DomainError(f"{name} must lie in [0, 1), got {v}")
        if not (0.0 <= self.omega_a <= 1.0):
            raise DomainError(f"omega_a must lie in [0, 1], got {self.omega_a}")

    @property
    def omega_b(self) -> float:
        return 1.0 - self.omega_a

    @property
    def total(self) -> float:
        return self.lambda_a + self.lambda_b

    @classmethod
    def symmetric(cls, total: float, omega_a: float = 0.5) -> "TrafficProfile":
        return cls(total / 2.0, total / 2.0, omega_a)


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    margin: float
    binding: str
    margins: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class BafVerdict:
    """Published-formula verdict alongside the re-derived one."""

    published: StabilityVerdict
    rederived: StabilityVerdict

    @property
    def stable(self) -> bool:
        return self.published.stable

    @property
    def disagree(self) -> bool:
        return self.published.stable != self.rederived.stable


@dataclass(frozen=True)
class QueueRates:
    lambda_r: float
    mu_r: float
    pi0: float


def _snap(m: float) -> float:
    return 0.0 if abs(m) <= STRICT_MARGIN else float(m)


def _verdict(margins: dict[str, float], decisive: tuple[str, ...]) -> StabilityVerdict:
    """Binding constraint is the smallest margin among ``decisive``."""
    margins = {k: _snap(v) for k, v in margins.items()}
    binding = min(decisive, key=lambda k: margins[k])
    m = margins[binding]
    return StabilityVerdict(m > 0.0, m, binding, MappingProxyType(margins))


# --------------------------------------------------------------------------
# Geo/Geo/1


def geo_geo1_stationary(p: float, q: float, j_max: int) -> tuple[float, np.ndarray]:
    """Stationary queue-length law of a discrete-time Geo/Geo/1 queue.

    ``p`` is the per-slot arrival probability and ``q`` the per-slot service
    probability.  The law is that of the number in system just after the
    slot's arrival and before its service attempt.  Returns ``pi0`` and
    ``pi_1 .. pi_j_max``.
    """
    if not (0.0 <= p <= 1.0 and 0.0 < q <= 1.0):
        raise DomainError(f"need probabilities 0 <= p <= 1, 0 < q <= 1; got p={p}, q={q}")
    if p >= q:
        raise UnstableError(f"arrival probability {p} >= service probability {q}: no stationary law")
    pi0 = (q - p) / q
    j = np.arange(1, j_max + 1)
    if q == 1.0:
        # limit q -> 1: only one packet can ever be present
        tail = np.where(j == 1, p / (1.0 - p) * pi0, 0.0)
        return pi0, tail
    rho = p * (1.0 - q) / (q * (1.0 - p))
    return pi0, rho**j * pi0 / (1.0 - q)


# --------------------------------------------------------------------------
# non-cooperative TDMA


def tdma_stable(traffic: TrafficProfile, k_a: int, k_b: int, n: int,
                channel: ChannelParams, model: PcModel = PcModel.SECOND) -> StabilityVerdict:
    cap_a = traffic.omega_a * success_prob(k_a, n, channel, model)
    cap_b = traffic.omega_b * success_prob(k_b, n, channel, model)
    margins = {
        SOURCE_A: cap_a - traffic.lambda_a,
        SOURCE_B: cap_b - traffic.lambda_b,
        SUM: cap_a + cap_b - traffic.total,
    }
    return _verdict(margins, (SOURCE_A, SOURCE_B, SUM))


# --------------------------------------------------------------------------
# relay queues


def _coop_terms(k, n, links, model, batch_source=1):
    payload = batch_source * k
    psd = success_prob(payload, n, links.sd, model)
    forward = error_prob(payload, n, links.sd, model) * success_prob(payload, n, links.sr, model)
    return psd + forward, forward


def relay_rates(lambda_i: float, omega_i: float, k: int, n: int, links: LinkSet,
                model: PcModel = PcModel.SECOND, payload_rd: int | None = None,
                batch: int = 1) -> QueueRates:
    """Arrival and departure rates of relay queue ``Q_iR`` in packets per slot.

    The source idles with probability ``pi0 = 1 - lambda_i/mu_i`` where
    ``mu_i = omega_i (P_sd + P_e,sd P_sr)``.  Packets reach the relay at
    ``omega_i (1 - pi0) P_e,sd P_sr``; the relay serves ``batch`` packets per
    success at ``omega_i pi0 P_rd(payload_rd)``, so ``mu_r`` carries the factor
    ``batch``.  ``payload_rd`` defaults to ``batch * k``.
    """
    served, forward = _coop_terms(k, n, links, model)
    mu_i = omega_i * served
    if not lambda_i < mu_i:
        raise UnstableError(f"source unstable: lambda={lambda_i} >= mu={mu_i}; idle probability undefined")
    payload_rd = batch * k if payload_rd is None else payload_rd
    pi0 = 1.0 - lambda_i / mu_i
    lam_r = omega_i * (1.0 - pi0) * forward
    mu_r = batch * omega_i * pi0 * success_prob(payload_rd, n, links.rd, model)
    return QueueRates(lam_r, mu_r, pi0)


def _relay_limit(served, forward, prd, weight):
    den = weight * prd + forward
    return 0.0 if den <= 0.0 else served * prd / den


def _coop_margins(traffic, served, source_scale, relay_lambda_cap):
    """Six constraints for a cooperative protocol on the lambda scale."""
    wa, wb = traffic.omega_a, traffic.omega_b
    src = source_scale * served
    return {
        SOURCE_A: wa * src - traffic.lambda_a,
        SOURCE_B: wb * src - traffic.lambda_b,
        SUM: src - traffic.total,
        RELAY_A: wa * relay_lambda_cap - traffic.lambda_a,
        RELAY_B: wb * relay_lambda_cap - traffic.lambda_b,
        RELAY_SUM: relay_lambda_cap - traffic.total,
    }


def cc_stable(traffic: TrafficProfile, k: int, n: int, links: LinkSet,
              model: PcModel = PcModel.SECOND) -> StabilityVerdict:
    """Summed source region and summed relay region; the relay region decides.

    Per-queue margins are included in ``margins`` for asymmetric loads,
    where the summed regions are necessary but not sufficient.
    """
    served, forward = _coop_terms(k, n, links, model)
    prd = success_prob(k, n, links.rd, model)
    cap = _relay_limit(served, forward, prd, 1.0)
    return _verdict(_coop_margins(traffic, served, 1.0, cap), (SUM, RELAY_SUM))


def baf_stable(traffic: TrafficProfile, k: int, L: int, n: int, links: LinkSet,
               model: PcModel = PcModel.SECOND, variant: str = "relay") -> BafVerdict:
    """Batch-and-forward stability under both relay-arm formulas.

    ``variant="relay"``: the relay batches ``L`` packets.  ``"source"``: the
    sources batch.  The re-derived relay condition requires, per relay
    queue, that packets arrive slower than ``L * omega_i pi0 P_rd(Lk)``
    (relay batching) or ``omega_i pi0 P_rd(k)`` with the source idle
    probability of a batch server (source batching).
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if variant == "relay":
        served, forward = _coop_terms(k, n, links, model)
        prd = success_prob(L * k, n, links.rd, model)
        published_cap = L * _relay_limit(served, forward, prd, 1.0)
        alt_cap = L * _relay_limit(served, forward, prd, float(L))
        scale = 1.0
    elif variant == "source":
        served, forward = _coop_terms(k, n, links, model, batch_source=L)
        prd = success_prob(k, n, links.rd, model)
        published_cap = _relay_limit(served, forward, prd, 1.0)
        alt_cap = _relay_limit(served, forward, prd, 1.0 / L)
        scale = float(L)
    else:
        raise DomainError(f"variant must be 'relay' or 'source', got {variant!r}")
    decisive = (SUM, RELAY_SUM)
    published = _verdict(_coop_margins(traffic, served, scale, published_cap), decisive)
    alt = _verdict(_coop_margins(traffic, served, scale, alt_cap), decisive)
    return BafVerdict(published, alt)


def baf_capacity(k: int, L: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND,
                 variant: str = "relay", relay_arm: RelayArm = RelayArm.PUBLISHED) -> float:
    """Largest stable total arrival rate (packets/slot) for symmetric traffic."""
    v = baf_stable(TrafficProfile(0.0, 0.0), k, L, n, links, model, variant)
    chosen = v.published if RelayArm(relay_arm) is RelayArm.PUBLISHED else v.rederived
    return min(chosen.margins[SUM], chosen.margins[RELAY_SUM])


def cc_capacity(k: int, n: int, links: LinkSet, model: PcModel = PcModel.SECOND) -> float:
    return cc_stable(TrafficProfile(0.0, 0.0), k, n, links, model).margins[RELAY_SUM]


# --------------------------------------------------------------------------
# cognitive primary/secondary split


@dataclass(frozen=True)
class CognitiveSplit:
    omega_a: float
    omega_b: float
    k_b: int
    u_secondary: float


def cognitive_split(lambda_a: float, k_a: int, k_b_max: int, n: int, channel: ChannelParams,
                    model: PcModel = PcModel.SECOND, delta: float = STRICT_MARGIN) -> CognitiveSplit:
    """Smallest TDMA share that keeps the primary source stable, and the
    secondary source's best packet size in the remaining share."""
    pc_a = success_prob(k_a, n, channel, model)
    omega_a = lambda_a / pc_a + delta if pc_a > 0 else math.inf
    if omega_a > 1.0:
        deficit = lambda_a - (1.0 - delta) * pc_a
        raise DomainError(
            f"primary demand {lambda_a} cannot be served: needs share {omega_a:.6g} > 1 "
            f"(deficit {deficit:.3g} packets/slot)"
        )
    omega_b = 1.0 - omega_a
    # the argmax of omega_b * u(k) does not depend on omega_b
    u = tdma_throughput(np.arange(1, k_b_max + 1), n, channel, model)
    i = int(np.argmax(u))
    return CognitiveSplit(omega_a, omega_b, i + 1, omega_b * float(u[i]))
