"""Closed-form device models and their logic-level effect classes.

Covers oxide thickness after chemical-mechanical polishing, capacitive
crosstalk between two adjacent wires, via formation and line-thinning delay.
Units follow the parameter names: nm, s, F, ohm, V, ps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields


class EffectClass(str, enum.Enum):
    STUCK_AT_0 = "StuckAt0"
    STUCK_AT_1 = "StuckAt1"
    TIMING_FAULT = "TimingFault"
    STEALTHY_SIGNAL = "StealthySignal"
    NO_EFFECT = "NoEffect"

    def __str__(self) -> str:
        return self.value


class PhysicsDomainError(ValueError):
    pass


# Which obfuscation classes each fabrication mechanism can produce.
# "stuck" covers both polarities.
FAULT_MECHANISMS = {
    ("doping", "source/drain"): {"stuck"},
    ("doping", "channel"): {"stuck", "timing"},
    ("metal-fill", ""): {"stuck", "timing", "stealthy"},
    ("ild", "thinning"): {"timing", "stealthy"},
    ("ild", "thickening"): {"stuck", "timing", "stealthy"},
    ("interconnect-mask", ""): {"stuck", "timing", "stealthy"},
    ("sraf", ""): {"timing"},
}


def _finite(obj) -> None:
    for f in fields(obj):
        v = getattr(obj, f.name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise PhysicsDomainError(f"{f.name} must be a finite number, got {v!r}")


@dataclass(frozen=True)
class CmpParams:
    K: float  # polishing rate, nm/s
    z0: float  # deposited oxide thickness, nm
    z1: float  # initial step height, nm
    t: float  # polish time, s
    rho0: float  # initial pattern density, (0, 1]

    def __post_init__(self):
        _finite(self)
        if not (self.K > 0 and self.z0 > 0 and self.z1 >= 0 and self.t >= 0):
            raise PhysicsDomainError("need K>0, z0>0, z1>=0, t>=0")
        if not 0 < self.rho0 <= 1:
            raise PhysicsDomainError(f"rho0 must lie in (0, 1], got {self.rho0}")


@dataclass(frozen=True)
class CrosstalkParams:
    c_adj: float
    c_gnd_v: float
    c_gnd_a: float
    r_victim: float
    r_aggressor: float

    def __post_init__(self):
        _finite(self)
        if min(self.c_adj, self.c_gnd_v, self.c_gnd_a, self.r_victim, self.r_aggressor) < 0:
            raise PhysicsDomainError("capacitances and resistances must be >= 0")
        if not self.c_gnd_v + self.c_adj > 0:
            raise PhysicsDomainError("c_gnd_v + c_adj must be > 0")
        if not self.r_victim * (self.c_gnd_v + self.c_adj) > 0:
            raise PhysicsDomainError("victim time constant must be > 0")

    def swapped(self) -> "CrosstalkParams":
        """Same wire pair with the aggressor and victim roles exchanged."""
        return CrosstalkParams(
            c_adj=self.c_adj,
            c_gnd_v=self.c_gnd_a,
            c_gnd_a=self.c_gnd_v,
            r_victim=self.r_aggressor,
            r_aggressor=self.r_victim,
        )


@dataclass(frozen=True)
class SignalEnv:
    v_dd: float = 1.0
    v_th: float = 0.5
    slack: float = 50.0

    def __post_init__(self):
        _finite(self)
        if not 0 < self.v_th < self.v_dd:
            raise PhysicsDomainError("need 0 < v_th < v_dd")
        if self.slack < 0:
            raise PhysicsDomainError("slack must be >= 0")


def cmp_breakpoint(p: CmpParams) -> float:
    """Polish time at which the step is planarized."""
    return p.rho0 * p.z1 / p.K


def ild_thickness(p: CmpParams) -> float:
    """Oxide thickness z after polishing for time ``p.t``.

    Before the breakpoint the raised regions polish at K/rho0; afterwards the
    surface is planar and polishes at K. The breakpoint uses the second form.
    The second branch is evaluated exactly as the model states it.
    """
    if p.t < cmp_breakpoint(p):
        return p.z0 - p.K * p.t / p.rho0
    return p.z0 - p.z1 - p.K * p.t + p.rho0 * p.z1


def crosstalk_ratio_k(p: CrosstalkParams) -> float:
    """Ratio of aggressor to victim RC time constants."""
    return (p.r_aggressor * (p.c_gnd_a + p.c_adj)) / (p.r_victim * (p.c_gnd_v + p.c_adj))


def coupling_ratio(p: CrosstalkParams) -> float:
    """dV_victim / dV_aggressor."""
    k = crosstalk_ratio_k(p)
    return p.c_adj / (p.c_gnd_v + p.c_adj) / (1.0 + k)


def crosstalk_delta_v(p: CrosstalkParams, dv_aggressor: float) -> float:
    return coupling_ratio(p) * dv_aggressor


def classify_crosstalk(p: CrosstalkParams, dv_aggressor: float, env: SignalEnv) -> EffectClass:
    if crosstalk_delta_v(p, dv_aggressor) >= env.v_th:
        return EffectClass.STEALTHY_SIGNAL
    return EffectClass.NO_EFFECT


def classify_via(p: CmpParams, via_height: float) -> EffectClass:
    """A via shorter than the oxide never reaches the lower metal: the net floats.

    Open nets are reported as stuck-at-0; a via exactly spanning the oxide
    connects.
    """
    if not via_height > 0:
        raise PhysicsDomainError("via_height must be > 0")
    if ild_thickness(p) > via_height:
        return EffectClass.STUCK_AT_0
    return EffectClass.NO_EFFECT


def line_delay_factor(width_nominal: float, width_thinned: float) -> float:
    """Delay multiplier of a thinned line (R ~ 1/width, C held fixed)."""
    if not 0 < width_thinned <= width_nominal:
        raise PhysicsDomainError("need 0 < width_thinned <= width_nominal")
    return width_nominal / width_thinned


def classify_timing(nominal_delay: float, delay_factor: float, env: SignalEnv) -> EffectClass:
    if not nominal_delay > 0:
        raise PhysicsDomainError("nominal_delay must be > 0")
    if nominal_delay * (delay_factor - 1.0) > env.slack:
        return EffectClass.TIMING_FAULT
    return EffectClass.NO_EFFECT


def _pick(record: dict, keys) -> dict:
    missing = sorted(k for k in keys if k not in record)
    if missing:
        raise PhysicsDomainError(f"missing fields: {missing}")
    return {k: record[k] for k in keys}


def classify_record(record: dict, env: SignalEnv) -> dict:
    """Evaluate one parameter record from a physics JSON file.

    A record may hold CMP fields (plus optional ``via_height``), crosstalk
    fields (plus ``dv_aggressor``) and/or line fields (``width_nominal``,
    ``width_thinned``, ``nominal_delay``). Returns the computed quantities and
    one effect class per recognised group.
    """
    out: dict = {}
    if "id" in record:
        out["id"] = record["id"]
    cmp_keys = {"K", "z0", "z1", "t", "rho0"}
    xt_keys = {"c_adj", "c_gnd_v", "c_gnd_a", "r_victim", "r_aggressor"}
    line_keys = {"width_nominal", "width_thinned"}
    known = cmp_keys | xt_keys | line_keys | {"id", "via_height", "dv_aggressor", "nominal_delay"}
    unknown = set(record) - known
    if unknown:
        raise PhysicsDomainError(f"unknown fields: {sorted(unknown)}")
    matched = False
    if cmp_keys & set(record):
        p = CmpParams(**_pick(record, cmp_keys))
        out["z"] = ild_thickness(p)
        if "via_height" in record:
            out["via_class"] = str(classify_via(p, record["via_height"]))
        matched = True
    if xt_keys & set(record):
        p = CrosstalkParams(**_pick(record, xt_keys))
        out["k"] = crosstalk_ratio_k(p)
        dv = record.get("dv_aggressor", env.v_dd)
        out["dv_victim"] = crosstalk_delta_v(p, dv)
        out["crosstalk_class"] = str(classify_crosstalk(p, dv, env))
        matched = True
    if line_keys & set(record):
        w = _pick(record, line_keys)
        factor = line_delay_factor(w["width_nominal"], w["width_thinned"])
        out["delay_factor"] = factor
        if "nominal_delay" in record:
            out["timing_class"] = str(classify_timing(record["nominal_delay"], factor, env))
        matched = True
    if not matched:
        raise PhysicsDomainError("record has no recognised parameter group")
    return out
