"""Slot-level Monte Carlo simulation of the NC, CC and BAF protocols.

One run is a sequential, seeded pass over ``slots`` time slots.  Each slot
consumes exactly six uniforms from a PCG64 stream in the fixed order
(arrival A, arrival B, scheduler, S->D, S->R, R->D), whether or not the
corresponding event can happen, so runs of different protocols with the
same seed see the same randomness.

Slot convention: arrivals land at the start of the slot and can be served
in the same slot.  Idle statistics are taken at the service instant, which
is the epoch at which the Geo/Geo/1 idle probability ``(q - p)/q`` holds.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel
from .errors import DomainError, UnstableError
from .fbl_model import CodeSpec, PcModel, success_prob
from .stability import TrafficProfile, baf_capacity, cc_capacity
from .throughput import LinkSet, Protocol, RelayArm

log = logging.getLogger(__name__)

MIN_SLOTS = 10_000
N_WINDOWS = 200
CHUNK_SLOTS = 1 << 16

_PROTOCOL_CODE = {
    Protocol.NC: _kernel.NC,
    Protocol.CC: _kernel.CC,
    Protocol.BAF_RELAY: _kernel.BAF_RELAY,
    Protocol.BAF_SOURCE: _kernel.BAF_SOURCE,
}


class Classification(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SimConfig:
    protocol: Protocol
    traffic: TrafficProfile
    code: CodeSpec
    links: LinkSet
    model: PcModel = PcModel.SECOND
    slots: int = 1_000_000
    warmup_fraction: float = 0.1
    seed: int = 0
    saturated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "model", PcModel(self.model))
        if self.protocol is Protocol.OVERALL:
            raise DomainError("simulate a concrete protocol, not 'overall'")
        if self.slots < MIN_SLOTS:
            raise DomainError(f"slots must be >= {MIN_SLOTS}, got {self.slots}")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise DomainError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if not (0 <= self.seed < 2**64):
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.saturated and self.protocol is not Protocol.NC:
            raise DomainError("saturated sources are only meaningful for NC")

    @property
    def warmup(self) -> int:
        return int(self.slots * self.warmup_fraction)

    def link_probabilities(self) -> tuple[float, float, float]:
        """Success probabilities of S->D, S->R (source payload) and R->D (relay payload)."""
        k, n, L = self.code.k, self.code.n, self.code.L
        src = L * k if self.protocol is Protocol.BAF_SOURCE else k
        rel = L * k if self.protocol is Protocol.BAF_RELAY else k
        return (
            success_prob(src, n, self.links.sd, self.model),
            success_prob(src, n, self.links.sr, self.model),
            success_prob(rel, n, self.links.rd, self.model),
        )


@dataclass(frozen=True)
class Conservation:
    arrived: int
    delivered: int
    backlogged: int

    @property
    def balanced(self) -> bool:
        return self.arrived == self.delivered + self.backlogged


@dataclass(frozen=True)
class SimReport:
    delivered_bits: int
    empirical_throughput: float
    mean_queue: dict
    drift_slope: float
    idle_freq: dict
    conservation: Conservation
    measured_slots: int
    window_means: tuple = field(repr=False)

    def quarter_means(self) -> list[float]:
        w = np.asarray(self.window_means, dtype=float)
        return [float(q.mean()) for q in np.array_split(w, 4)]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["window_means"] = list(self.window_means)
        return out


def _uniform_chunks(seed: int, slots: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    t = 0
    while t < slots:
        m = min(CHUNK_SLOTS, slots - t)
        yield t, rng.random((m, _kernel.N_DRAWS))
        t += m


def _simulate(protocol_code, lam_a, lam_b, omega_a, L, p_sd, p_sr, p_rd,
              slots, warmup, seed, saturated, on_chunk=None):
    state = _kernel.new_state()
    measured = slots - warmup
    n_windows = min(N_WINDOWS, measured)
    window_len = measured // n_windows
    queue_sums = np.zeros(4, dtype=np.int64)
    window_sums = np.zeros(n_windows, dtype=np.int64)
    for t0, u in _uniform_chunks(seed, slots):
        _kernel.run_chunk(u, t0, warmup, protocol_code, lam_a, lam_b, omega_a, L,
                          p_sd, p_sr, p_rd, saturated, state, queue_sums,
                          window_sums, window_len)
        if on_chunk is not None:
            on_chunk(state)
    return state, queue_sums, window_sums, window_len


def run_sim(config: SimConfig) -> SimReport:
    p_sd, p_sr, p_rd = config.link_probabilities()
    tr = config.traffic
    warmup = config.warmup
    state, queue_sums, window_sums, window_len = _simulate(
        _PROTOCOL_CODE[config.protocol], tr.lambda_a, tr.lambda_b, tr.omega_a,
        config.code.L, p_sd, p_sr, p_rd, config.slots, warmup, config.seed,
        config.saturated,
    )
    K = _kernel
    measured = config.slots - warmup
    window_means = window_sums / window_len
    centers = (np.arange(len(window_means)) + 0.5) * window_len
    slope = float(np.polyfit(centers, window_means, 1)[0]) if len(window_means) > 1 else 0.0
    backlog = int(state[K.QA] + state[K.QB] + state[K.QAR] + state[K.QBR])
    bits = int(state[K.DELIVERED_MEASURED]) * config.code.k

    def idle(i, g):
        return float(state[i] / state[g]) if state[g] else 1.0

    return SimReport(
        delivered_bits=bits,
        empirical_throughput=bits / (measured * config.code.n),
        mean_queue={
            name: float(s / measured)
            for name, s in zip(("Q_A", "Q_B", "Q_AR", "Q_BR"), queue_sums)
        },
        drift_slope=slope,
        idle_freq={"A": idle(K.IDLE_A, K.GRANT_A), "B": idle(K.IDLE_B, K.GRANT_B)},
        conservation=Conservation(int(state[K.ARRIVED]), int(state[K.DELIVERED]), backlog),
        measured_slots=measured,
        window_means=tuple(float(x) for x in window_means),
    )


def classify_stability(report: SimReport, lambda_total: float) -> Classification:
    """Empirical stability from backlog drift.

    Unstable when the least-squares drift exceeds 2% of the offered load;
    stable when it is below 0.5% and the quarter-by-quarter backlog means
    do not grow monotonically past twice the first quarter (with a floor
    of one packet so an almost empty system is not flagged).
    """
    slope = report.drift_slope
    if slope > 0.02 * lambda_total:
        return Classification.UNSTABLE
    q = report.quarter_means()
    growing = all(a < b for a, b in zip(q, q[1:])) and q[-1] > 2.0 * max(q[0], 1.0)
    if slope <= 0.005 * lambda_total and not growing:
        return Classification.STABLE
    return Classification.INDETERMINATE


# --------------------------------------------------------------------------
# Geo/Geo/1 idle probability


@dataclass(frozen=True)
class Pi0Estimate:
    value: float
    stderr: float
    batches: int
    conservation: Conservation


def estimate_pi0(p: float, q: float, slots: int = 1_000_000, seed: int = 0,
                 warmup_fraction: float = 0.1, batches: int = 50) -> Pi0Estimate:
    """Idle frequency of a single NC source with arrival ``p`` and service ``q``.

    The standard error comes from batch means over ``batches`` equal
    stretches of the measured horizon.
    """
    if not (0.0 <= p < 1.0 and 0.0 < q <= 1.0):
        raise DomainError(f"need 0 <= p < 1 and 0 < q <= 1, got p={p}, q={q}")
    if p >= q:
        raise UnstableError(f"p={p} >= q={q}: the queue has no idle probability")
    if slots < MIN_SLOTS:
        raise DomainError(f"slots must be >= {MIN_SLOTS}")
    warmup = int(slots * warmup_fraction)
    measured = slots - warmup
    edges = warmup + (np.arange(1, batches + 1) * measured) // batches
    idle_at = np.zeros(batches, dtype=np.int64)
    grants_at = np.zeros(batches, dtype=np.int64)

    # chunk boundaries are made to coincide with batch edges
    state = _kernel.new_state()
    queue_sums = np.zeros(4, dtype=np.int64)
    window_sums = np.zeros(1, dtype=np.int64)
    rng = np.random.Generator(np.random.PCG64(seed))
    t = 0
    for b, stop in enumerate(np.concatenate(([warmup], edges))):
        while t < stop:
            m = int(min(CHUNK_SLOTS, stop - t))
            _kernel.run_chunk(rng.random((m, _kernel.N_DRAWS)), t, warmup, _kernel.NC,
                              p, 0.0, 1.0, 1, q, 0.0, 0.0, False, state, queue_sums,
                              window_sums, max(1, measured))
            t += m
        if b > 0:
            idle_at[b - 1] = state[_kernel.IDLE_A]
            grants_at[b - 1] = state[_kernel.GRANT_A]
    idle = np.diff(np.concatenate(([0], idle_at)))
    grants = np.diff(np.concatenate(([0], grants_at)))
    fracs = idle / grants
    value = float(idle_at[-1] / grants_at[-1])
    stderr = float(fracs.std(ddof=1) / math.sqrt(batches))
    kept = int(state[_kernel.QA])
    balance = Conservation(int(state[_kernel.ARRIVED]), int(state[_kernel.DELIVERED]), kept)
    return Pi0Estimate(value, stderr, batches, balance)


# --------------------------------------------------------------------------
# empirical stability boundary


@dataclass(frozen=True)
class BoundaryEstimate:
    midpoint: float
    half_width: float
    largest_stable: float
    smallest_unstable: float
    votes: dict

    def relative_error(self, reference: float) -> float:
        return abs(self.midpoint - reference) / reference


def _vote(classes: Sequence[Classification]) -> Classification:
    for c in Classification:
        if sum(x is c for x in classes) * 2 > len(classes):
            return c
    return Classification.INDETERMINATE


def _first_true(pred, lo: int, hi: int) -> int:
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def boundary_scan(protocol: Protocol, code: CodeSpec, links: LinkSet,
                  model: PcModel, lambda_grid: Sequence[float], slots: int,
                  seeds: Sequence[int], omega_a: float = 0.5,
                  warmup_fraction: float = 0.1) -> BoundaryEstimate:
    """Locate the total-load stability boundary by bisection over a grid.

    Loads are split evenly between the sources.  Each visited grid point
    is classified by majority vote over ``seeds``.  Two bisections find the
    largest stable and the smallest unstable point; the estimate is their
    midpoint and the half-width is half their distance.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise DomainError("lambda_grid must be strictly increasing with at least two points")
    if grid[0] < 0 or grid[-1] >= 2.0:
        raise DomainError("total loads must lie in [0, 2)")
    cache: dict[int, Classification] = {}

    def classify(i: int) -> Classification:
        if i not in cache:
            lam = float(grid[i])
            classes = []
            for seed in seeds:
                cfg = SimConfig(protocol, TrafficProfile.symmetric(lam, omega_a), code, links,
                                model, slots, warmup_fraction, int(seed))
                classes.append(classify_stability(run_sim(cfg), lam))
            cache[i] = _vote(classes)
            log.debug("lambda=%.6g -> %s", lam, cache[i].value)
        return cache[i]

    n = grid.size
    first_not_stable = _first_true(lambda i: classify(i) is not Classification.STABLE, 0, n)
    first_unstable = _first_true(lambda i: classify(i) is Classification.UNSTABLE, 0, n)
    votes = {float(grid[i]): c.value for i, c in sorted(cache.items())}
    if first_not_stable == 0 or first_unstable == n:
        raise DomainError(
            "grid does not bracket the boundary; widen it "
            f"(visited: {votes})"
        )
    lo = float(grid[first_not_stable - 1])
    hi = float(grid[first_unstable])
    return BoundaryEstimate((lo + hi) / 2.0, abs(hi - lo) / 2.0, lo, hi, votes)


def analytic_boundary(protocol: Protocol, code: CodeSpec, links: LinkSet,
                      model: PcModel = PcModel.SECOND,
                      relay_arm: RelayArm = RelayArm.PUBLISHED) -> float:
    """Closed-form total-load boundary (packets/slot) for symmetric traffic."""
    protocol = Protocol(protocol)
    if protocol is Protocol.NC:
        return float(success_prob(code.k, code.n, links.sd, model))
    if protocol is Protocol.CC:
        return cc_capacity(code.k, code.n, links, model)
    variant = "relay" if protocol is Protocol.BAF_RELAY else "source"
    return baf_capacity(code.k, code.L, code.n, links, model, variant, relay_arm)


@dataclass(frozen=True)
class Adjudication:
    protocol: str
    k: int
    L: int
    snrs: tuple
    empirical: float
    half_width: float
    published: float
    rederived: float
    published_rel_err: float
    rederived_rel_err: float
    tolerance: float
    matching: str

    def to_dict(self) -> dict:
        return asdict(self)


def adjudicate_baf(code: CodeSpec, links: LinkSet, model: PcModel = PcModel.SECOND,
                   protocol: Protocol = Protocol.BAF_RELAY, slots: int = 1_000_000,
                   seeds: Sequence[int] = (1, 2, 3, 4, 5), tolerance: float = 0.03,
                   resolution: float = 0.0025) -> Adjudication:
    """Compare both relay-arm boundaries with a simulated boundary scan.

    The grid is uniform from ``resolution*lo`` to ``1.3*hi`` where ``lo`` and
    ``hi`` are the smaller and larger of the two predictions, with step
    ``resolution*lo``, so neither candidate is favoured.
    """
    published = analytic_boundary(protocol, code, links, model, RelayArm.PUBLISHED)
    alt = analytic_boundary(protocol, code, links, model, RelayArm.REDERIVED)
    lo, hi = min(published, alt), max(published, alt)
    step = resolution * lo
    grid = np.arange(step, min(1.3 * hi, 1.999), step)
    est = boundary_scan(protocol, code, links, model, grid, slots, seeds)
    e_published = est.relative_error(published)
    e_alt = est.relative_error(alt)
    ok_published, ok_alt = e_published <= tolerance, e_alt <= tolerance
    matching = {(True, True): "both", (True, False): "published",
                (False, True): "rederived", (False, False): "neither"}[(ok_published, ok_alt)]
    return Adjudication(Protocol(protocol).value, code.k, code.L, links.snrs, est.midpoint,
                        est.half_width, published, alt, e_published, e_alt, tolerance, matching)
