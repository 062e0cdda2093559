"""Domain types shared by every module of the teleoperation stack.

Angles live in two spaces: raw degrees (what gloves and renderers speak)
and normalized [0, 1] (what the calibration model and motor commands
speak). `normalize`/`denormalize` convert between them against explicit
per-joint limits; the limits themselves are configuration, with
anthropomorphic defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from enum import Enum
from importlib import resources
from typing import Mapping, Optional

from .errors import ValidationError


class FingerId(Enum):
    """The four fingers of the hand; the thumb is built like the others."""

    THUMB = "thumb"
    INDEX = "index"
    MIDDLE = "middle"
    RING = "ring"


FINGER_ORDER = (FingerId.THUMB, FingerId.INDEX, FingerId.MIDDLE, FingerId.RING)

JOINT_NAMES = ("mcp_side", "mcp_fwd", "pip", "dip")

#: Hand versions shipped in the bundled weight/design records. The rigid
#: baseline carries no weights and is evaluation-only.
VERSION_NAMES = ("v1", "v2", "v3", "v4", "v5")
BASELINE_NAME = "allegro"
KNOWN_HAND_NAMES = VERSION_NAMES + (BASELINE_NAME,)

#: Minimum |det| of the 2x2 MCP weight block for it to count as invertible.
DET_EPSILON = 1e-6


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class LimitRange:
    """Raw angular range, in degrees, that maps onto normalized [0, 1]."""

    raw_min_deg: float
    raw_max_deg: float

    def __post_init__(self) -> None:
        _require_finite(self.raw_min_deg, "raw_min_deg")
        _require_finite(self.raw_max_deg, "raw_max_deg")
        if not self.raw_min_deg < self.raw_max_deg:
            raise ValidationError(
                f"raw_min_deg ({self.raw_min_deg}) must be < raw_max_deg ({self.raw_max_deg})"
            )

    @property
    def span_deg(self) -> float:
        return self.raw_max_deg - self.raw_min_deg


@dataclass(frozen=True)
class JointLimits:
    """Per-joint raw ranges. Defaults are anthropomorphic, not measured."""

    mcp_side: LimitRange = LimitRange(-30.0, 30.0)
    mcp_fwd: LimitRange = LimitRange(0.0, 90.0)
    pip: LimitRange = LimitRange(0.0, 100.0)
    dip: LimitRange = LimitRange(0.0, 90.0)

    def for_joint(self, joint: str) -> LimitRange:
        if joint not in JOINT_NAMES:
            raise ValidationError(f"unknown joint {joint!r}")
        return getattr(self, joint)

    def as_dict(self) -> dict:
        return {j: [self.for_joint(j).raw_min_deg, self.for_joint(j).raw_max_deg] for j in JOINT_NAMES}

    @classmethod
    def from_dict(cls, data: Mapping) -> "JointLimits":
        kwargs = {}
        for joint in JOINT_NAMES:
            if joint in data:
                lo, hi = data[joint]
                kwargs[joint] = LimitRange(float(lo), float(hi))
        extra = set(data) - set(JOINT_NAMES)
        if extra:
            raise ValidationError(f"unknown joint limit keys: {sorted(extra)}")
        return cls(**kwargs)


DEFAULT_JOINT_LIMITS = JointLimits()


def normalize(raw_deg: float, limits: LimitRange) -> float:
    """Map a raw angle in degrees onto [0, 1], clamping out-of-range values."""
    raw = _require_finite(raw_deg, "raw angle")
    x = (raw - limits.raw_min_deg) / limits.span_deg
    return min(1.0, max(0.0, x))


def denormalize(x: float, limits: LimitRange) -> float:
    """Exact inverse of `normalize` for in-range values."""
    _require_finite(x, "normalized angle")
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"normalized angle {x!r} outside [0, 1]")
    return limits.raw_min_deg + x * limits.span_deg


def _check_unit_interval(value: float, what: str) -> float:
    _require_finite(value, what)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{what} must lie in [0, 1], got {value!r}")
    return float(value)


@dataclass(frozen=True)
class JointAngles:
    """Normalized joint angles of one finger (side splay, forward fold, curl pair)."""

    mcp_side: float
    mcp_fwd: float
    pip: float
    dip: float

    def __post_init__(self) -> None:
        for name in JOINT_NAMES:
            _check_unit_interval(getattr(self, name), name)

    def as_tuple(self) -> tuple:
        return (self.mcp_side, self.mcp_fwd, self.pip, self.dip)

    @classmethod
    def from_raw_degrees(cls, angles_deg, limits: JointLimits) -> "JointAngles":
        """Normalize four raw angles (degrees) against per-joint limits."""
        if len(angles_deg) != 4:
            raise ValidationError(f"expected 4 joint angles, got {len(angles_deg)}")
        return cls(*(normalize(a, limits.for_joint(j)) for a, j in zip(angles_deg, JOINT_NAMES)))

    def raw_degrees(self, limits: JointLimits) -> tuple:
        return tuple(denormalize(getattr(self, j), limits.for_joint(j)) for j in JOINT_NAMES)


@dataclass(frozen=True)
class MotorTriple:
    """Clamped, normalized angles of one finger's three motors."""

    motor0: float
    motor1: float
    motor2: float

    def __post_init__(self) -> None:
        for name in ("motor0", "motor1", "motor2"):
            _check_unit_interval(getattr(self, name), name)

    def as_tuple(self) -> tuple:
        return (self.motor0, self.motor1, self.motor2)


@dataclass(frozen=True)
class MotorCommand:
    """One command to the hand: 12 motor values (3 per finger) plus a timestamp."""

    per_finger: Mapping[FingerId, MotorTriple]
    timestamp_ms: int

    def __post_init__(self) -> None:
        missing = [f for f in FINGER_ORDER if f not in self.per_finger]
        extra = [f for f in self.per_finger if f not in FINGER_ORDER]
        if missing or extra:
            raise ValidationError(
                f"command must cover exactly the four fingers (missing {missing}, extra {extra})"
            )
        object.__setattr__(self, "per_finger", dict(self.per_finger))

    def motors(self, finger: FingerId) -> MotorTriple:
        return self.per_finger[finger]


@dataclass(frozen=True)
class CalibrationWeights:
    """Affine joint-to-motor map for one finger.

    w1..w4 and b1, b2 form the 2x2 block driving the two MCP motors from
    (mcp_side, mcp_fwd); w5, w6, b3, b4 drive the single curl motor from
    (pip, dip) through an averaging form.
    """

    w1: float
    w2: float
    w3: float
    w4: float
    w5: float
    w6: float
    b1: float
    b2: float
    b3: float
    b4: float

    def __post_init__(self) -> None:
        for f in fields(self):
            _require_finite(getattr(self, f.name), f.name)

    @property
    def det(self) -> float:
        """Determinant of the MCP block [[w1, w3], [w2, w4]]."""
        return self.w1 * self.w4 - self.w3 * self.w2

    @property
    def mcp_invertible(self) -> bool:
        return abs(self.det) > DET_EPSILON

    def as_wb(self) -> tuple:
        w = (self.w1, self.w2, self.w3, self.w4, self.w5, self.w6)
        b = (self.b1, self.b2, self.b3, self.b4)
        return w, b

    @classmethod
    def from_wb(cls, w, b) -> "CalibrationWeights":
        if len(w) != 6 or len(b) != 4:
            raise ValidationError(f"expected 6 gains and 4 biases, got {len(w)} and {len(b)}")
        return cls(*map(float, w), *map(float, b))


@dataclass(frozen=True)
class DesignParams:
    """Physical design record for one hand version; inert metadata here."""

    palm_size_mm: tuple
    finger_length_mm: float
    mcp_diameter_mm: float
    mcp_height_mm: float
    dip_crease_width_mm: float
    thumb_angle_deg: float
    fingertip_edge_mm: float
    fingertip_thickness_mm: float
    finger_strength_n: float

    def __post_init__(self) -> None:
        if len(self.palm_size_mm) != 2:
            raise ValidationError("palm_size_mm must be [width, length]")
        object.__setattr__(self, "palm_size_mm", tuple(float(v) for v in self.palm_size_mm))
        dims = self.palm_size_mm + (
            self.finger_length_mm,
            self.mcp_diameter_mm,
            self.mcp_height_mm,
            self.dip_crease_width_mm,
            self.fingertip_edge_mm,
            self.fingertip_thickness_mm,
            self.finger_strength_n,
        )
        for v in dims:
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"design dimensions must be strictly positive, got {v!r}")
        if not 0.0 <= self.thumb_angle_deg <= 90.0:
            raise ValidationError(f"thumb_angle_deg must lie in [0, 90], got {self.thumb_angle_deg!r}")


@dataclass(frozen=True)
class HandVersion:
    """A named hand design: calibration weights per finger plus design record."""

    name: str
    weights: Optional[Mapping[FingerId, CalibrationWeights]] = None
    design: Optional[DesignParams] = None

    def __post_init__(self) -> None:
        if self.weights is not None:
            w = dict(self.weights)
            missing = [f for f in FINGER_ORDER if f not in w]
            if missing:
                raise ValidationError(f"weights must cover all fingers, missing {missing}")
            object.__setattr__(self, "weights", w)


# ---------------------------------------------------------------------------
# Bundled data files
# ---------------------------------------------------------------------------

_WEIGHT_FIELDS = {"version", "w", "b"}
_DESIGN_FIELDS = {
    "version",
    "palm_size_mm",
    "finger_length_mm",
    "mcp_diameter_mm",
    "mcp_height_mm",
    "dip_crease_width_mm",
    "thumb_angle_deg",
    "fingertip_edge_mm",
    "fingertip_thickness_mm",
    "finger_strength_n",
}


def _data_path(name: str):
    return resources.files("dash_teleop").joinpath("data").joinpath(name)


def load_weights_bundle(path=None) -> dict:
    """Load calibration weights keyed by version name.

    Each record must carry exactly the fields `version`, `w` (six gains)
    and `b` (four biases); anything missing or extra is rejected.
    """
    source = _data_path("calibration_weights.json") if path is None else path
    with open(source) if path is not None else source.open("r", encoding="utf-8") as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise ValidationError("weights file must be a JSON array of records")
    out = {}
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or set(rec) != _WEIGHT_FIELDS:
            got = sorted(rec) if isinstance(rec, dict) else type(rec).__name__
            raise ValidationError(
                f"weights record {i}: expected exactly fields {sorted(_WEIGHT_FIELDS)}, got {got}"
            )
        name = rec["version"]
        if name in out:
            raise ValidationError(f"weights record {i}: duplicate version {name!r}")
        out[name] = CalibrationWeights.from_wb(rec["w"], rec["b"])
    return out


def load_design_params(path=None) -> dict:
    """Load per-version design records (dimensions, angles, strength)."""
    source = _data_path("design_params.json") if path is None else path
    with open(source) if path is not None else source.open("r", encoding="utf-8") as fh:
        records = json.load(fh)
    out = {}
    for i, rec in enumerate(records):
        if set(rec) != _DESIGN_FIELDS:
            raise ValidationError(
                f"design record {i}: expected exactly fields {sorted(_DESIGN_FIELDS)}, got {sorted(rec)}"
            )
        name = rec["version"]
        kwargs = {k: v for k, v in rec.items() if k != "version"}
        out[name] = DesignParams(**kwargs)
    return out


def load_hand_versions(weights_path=None, design_path=None) -> dict:
    """Assemble the full version registry: v1..v5 calibrated, baseline bare.

    All four fingers of a version share one weight set by default; callers
    may rebuild a HandVersion with per-finger overrides where needed.
    """
    weights = load_weights_bundle(weights_path)
    designs = load_design_params(design_path)
    out = {}
    for name in VERSION_NAMES:
        if name not in weights:
            raise ValidationError(f"weights bundle is missing version {name!r}")
        shared = weights[name]
        out[name] = HandVersion(
            name=name,
            weights={f: shared for f in FINGER_ORDER},
            design=designs.get(name),
        )
    out[BASELINE_NAME] = HandVersion(name=BASELINE_NAME)
    return out
