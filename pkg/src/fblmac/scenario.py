"""Scenario files: flat ``key=value`` lines.

Grammar::

    file    := line*
    line    := blank | comment | pair
    comment := optional spaces, '#', anything
    pair    := key '=' value [ '#' anything ]
    key     := [a-z_]+          (surrounding spaces ignored)
    value   := non-empty text   (surrounding spaces ignored)

Each key may appear once.  Keys ending in ``_db`` give an SNR in decibels
and are converted to linear at parse time; ``snr_sd`` and ``snr_sd_db``
count as the same key.  Unknown keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import DomainError
from .fbl_model import CodeSpec, PcModel
from .netsim import MIN_SLOTS, SimConfig
from .stability import TrafficProfile
from .throughput import LinkSet, Protocol, RelayArm


class ScenarioError(DomainError):
    pass


@dataclass(frozen=True)
class SimBlock:
    slots: int
    seed: int = 0
    warmup: float = 0.1


@dataclass(frozen=True)
class Scenario:
    protocol: Protocol
    snr_sd: float
    n: int
    snr_sr: Optional[float] = None
    snr_rd: Optional[float] = None
    k: Optional[int] = None
    L: Optional[int] = None
    lambda_a: float = 0.0
    lambda_b: float = 0.0
    omega_a: float = 0.5
    model: PcModel = PcModel.SECOND
    k_max: Optional[int] = None
    l_max: int = 8
    relay_arm: RelayArm = RelayArm.PUBLISHED
    sim: Optional[SimBlock] = None

    def links(self) -> LinkSet:
        # NC ignores the relay links; reuse the direct link so a LinkSet exists
        sr = self.snr_sr if self.snr_sr is not None else self.snr_sd
        rd = self.snr_rd if self.snr_rd is not None else self.snr_sd
        return LinkSet.from_snrs(self.snr_sd, sr, rd)

    def traffic(self) -> TrafficProfile:
        return TrafficProfile(self.lambda_a, self.lambda_b, self.omega_a)

    def with_values(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def sim_config(self, k: int, L: int, seed: Optional[int] = None) -> SimConfig:
        if self.sim is None:
            raise ScenarioError("simulation needs a 'slots' key")
        return SimConfig(
            protocol=self.protocol, traffic=self.traffic(), code=CodeSpec(k, self.n, L),
            links=self.links(), model=self.model, slots=self.sim.slots,
            warmup_fraction=self.sim.warmup,
            seed=self.sim.seed if seed is None else seed,
        )


def _float(key, text):
    try:
        v = float(text)
    except ValueError:
        raise ScenarioError(f"{key}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ScenarioError(f"{key}: must be finite, got {text!r}")
    return v


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        v = _float(key, text)
        if v != int(v):
            raise ScenarioError(f"{key}: must be an integer, got {text!r}") from None
        return int(v)


def _positive(conv):
    def check(key, text):
        v = conv(key, text)
        if v <= 0:
            raise ScenarioError(f"{key}: must be positive, got {text!r}")
        return v
    return check


def _unit(closed_top: bool):
    def check(key, text):
        v = _float(key, text)
        if v < 0 or v > 1 or (v == 1 and not closed_top):
            top = "]" if closed_top else ")"
            raise ScenarioError(f"{key}: must lie in [0, 1{top}, got {text!r}")
        return v
    return check


def _enum(cls):
    def check(key, text):
        try:
            return cls(text.strip().lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ScenarioError(f"{key}: expected one of {choices}, got {text!r}") from None
    return check


def _slots(key, text):
    v = _int(key, text)
    if v < MIN_SLOTS:
        raise ScenarioError(f"{key}: must be >= {MIN_SLOTS}, got {text!r}")
    return v


def _seed(key, text):
    v = _int(key, text)
    if not 0 <= v < 2**64:
        raise ScenarioError(f"{key}: must be an unsigned 64-bit integer, got {text!r}")
    return v


_FIELDS = {
    "protocol": _enum(Protocol),
    "snr_sd": _positive(_float),
    "snr_sr": _positive(_float),
    "snr_rd": _positive(_float),
    "n": _positive(_int),
    "k": _positive(_int),
    "L": _positive(_int),
    "lambda_a": _unit(False),
    "lambda_b": _unit(False),
    "omega_a": _unit(True),
    "model": _enum(PcModel),
    "k_max": _positive(_int),
    "l_max": _positive(_int),
    "relay_arm": _enum(RelayArm),
    "slots": _slots,
    "seed": _seed,
    "warmup": _unit(False),
}
_DB_KEYS = {"snr_sd_db": "snr_sd", "snr_sr_db": "snr_sr", "snr_rd_db": "snr_rd"}
_SIM_KEYS = ("slots", "seed", "warmup")


def parse_scenario(text: str) -> Scenario:
    values: dict = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            raise ScenarioError(f"line {lineno}: {key}: empty value")
        canonical = _DB_KEYS.get(key, key)
        if canonical not in _FIELDS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if canonical in seen:
            raise ScenarioError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[canonical]})")
        seen[canonical] = lineno
        try:
            if key in _DB_KEYS:
                values[canonical] = 10.0 ** (_float(key, value) / 10.0)
            else:
                values[canonical] = _FIELDS[key](key, value)
        except ScenarioError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None

    for key in ("protocol", "snr_sd", "n"):
        if key not in values:
            raise ScenarioError(f"missing required key {key!r}")
    if values["protocol"] is not Protocol.NC:
        for key in ("snr_sr", "snr_rd"):
            if key not in values:
                raise ScenarioError(f"missing required key {key!r} for protocol {values['protocol'].value}")
    sim_values = {k: values.pop(k) for k in _SIM_KEYS if k in values}
    if sim_values:
        if "slots" not in sim_values:
            raise ScenarioError("missing required key 'slots' for the simulation block")
        values["sim"] = SimBlock(**sim_values)
    return Scenario(**values)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
