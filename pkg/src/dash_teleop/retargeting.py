"""Glove-to-hand retargeting pipeline with safety limits.

Each glove frame carries four raw human joint angles per finger. The
pipeline normalizes them against the operator's own calibrated ranges
(joint-to-joint mapping), smooths the joint targets, converts to motor
commands through the calibration model, and rate-limits the result so no
motor ever jumps more than `max_delta_per_tick` between commands. A
watchdog freezes the last command when frames go stale.

Per session there is exactly one PipelineState, mutated only from one
logical execution; everything it emits is immutable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, TextIO

from .calibration import ForwardResult, clamp01, forward_finger
from .errors import FrameRejected, ValidationError
from .hand_model import (
    DEFAULT_JOINT_LIMITS,
    FINGER_ORDER,
    CalibrationWeights,
    FingerId,
    JointAngles,
    JointLimits,
    MotorCommand,
    MotorTriple,
    normalize,
)

QUAT_NORM_TOL = 1e-6


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class GloveFrame:
    """Timestamped raw human joint angles (degrees), four per finger."""

    timestamp_ms: int
    per_finger: Mapping[FingerId, tuple]

    def __post_init__(self) -> None:
        angles = {}
        for f in FINGER_ORDER:
            if f not in self.per_finger:
                raise ValidationError(f"frame missing finger {f.value}")
            vals = tuple(float(v) for v in self.per_finger[f])
            if len(vals) != 4:
                raise ValidationError(f"{f.value}: expected 4 angles, got {len(vals)}")
            for v in vals:
                _require_finite(v, f"{f.value} angle")
            angles[f] = vals
        object.__setattr__(self, "per_finger", angles)


@dataclass(frozen=True)
class WristPose:
    """Wrist position (m) and unit quaternion orientation (w, x, y, z)."""

    position_m: tuple
    orientation_wxyz: tuple
    timestamp_ms: int

    def __post_init__(self) -> None:
        p = tuple(_require_finite(v, "position") for v in self.position_m)
        q = tuple(_require_finite(v, "quaternion") for v in self.orientation_wxyz)
        if len(p) != 3 or len(q) != 4:
            raise ValidationError("wrist pose needs a 3-vector position and 4-vector quaternion")
        norm = math.sqrt(sum(c * c for c in q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise ValidationError(f"quaternion norm {norm} deviates from 1 by more than {QUAT_NORM_TOL}")
        object.__setattr__(self, "position_m", p)
        object.__setattr__(self, "orientation_wxyz", q)


@dataclass(frozen=True)
class WorkspaceBox:
    """Axis-aligned bounds (m) the retargeted wrist position is clamped into."""

    min_m: tuple = (-0.8, -0.8, 0.0)
    max_m: tuple = (0.8, 0.8, 1.2)

    def __post_init__(self) -> None:
        if len(self.min_m) != 3 or len(self.max_m) != 3:
            raise ValidationError("workspace box needs 3-vector min and max")
        object.__setattr__(self, "min_m", tuple(float(v) for v in self.min_m))
        object.__setattr__(self, "max_m", tuple(float(v) for v in self.max_m))
        if any(lo >= hi for lo, hi in zip(self.min_m, self.max_m)):
            raise ValidationError("workspace box min must be below max on every axis")

    def clamp(self, p: tuple) -> tuple:
        return tuple(min(hi, max(lo, v)) for v, lo, hi in zip(p, self.min_m, self.max_m))


def _default_human_limits() -> dict:
    return {f: DEFAULT_JOINT_LIMITS for f in FINGER_ORDER}


@dataclass(frozen=True)
class RetargetConfig:
    """Tunable pipeline parameters; none of these are measured quantities.

    Human-side limits are a per-operator calibration record (the operator
    sweeps each joint and the extremes are captured); defaults mirror the
    robot ranges. max_delta_per_tick = inf disables rate limiting.
    """

    human_limits: Mapping[FingerId, JointLimits] = field(default_factory=_default_human_limits)
    robot_limits: JointLimits = DEFAULT_JOINT_LIMITS
    smoothing_alpha: float = 0.5
    max_delta_per_tick: float = 0.05
    tick_ms: int = 16
    workspace_scale: float = 1.5
    workspace_box_m: WorkspaceBox = WorkspaceBox()
    stale_timeout_ms: int = 200

    def __post_init__(self) -> None:
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ValidationError(f"smoothing_alpha must lie in (0, 1], got {self.smoothing_alpha!r}")
        if not self.max_delta_per_tick > 0:
            raise ValidationError("max_delta_per_tick must be positive")
        if self.tick_ms <= 0 or self.stale_timeout_ms <= 0:
            raise ValidationError("tick_ms and stale_timeout_ms must be positive")
        if not (math.isfinite(self.workspace_scale) and self.workspace_scale > 0):
            raise ValidationError("workspace_scale must be positive")
        limits = dict(self.human_limits)
        missing = [f for f in FINGER_ORDER if f not in limits]
        if missing:
            raise ValidationError(f"human_limits missing fingers {missing}")
        object.__setattr__(self, "human_limits", limits)


class PipelineStatus(Enum):
    LIVE = "live"
    HOLDING = "holding"
    FAULTED = "faulted"


class PipelineState:
    """Mutable per-session state: last emitted command, smoothing memory,
    watchdog status. Not safe for concurrent mutation."""

    def __init__(self, waist_frame=(1.0, 0.0, 0.0, 0.0)):
        self.last_emitted: Optional[MotorCommand] = None
        self.last_frame_ts: Optional[int] = None
        self.joint_targets: Optional[dict] = None
        self.last_forward: dict = {}
        self.waist_frame = tuple(waist_frame)
        self.status = PipelineStatus.LIVE
        self.fault_reason: Optional[str] = None
        self.frames_accepted = 0
        self.frames_rejected = 0
        self.saturation_events = 0

    def fault(self, reason: str) -> None:
        self.status = PipelineStatus.FAULTED
        self.fault_reason = reason

    def reset(self) -> None:
        self.status = PipelineStatus.LIVE
        self.fault_reason = None


def map_finger(glove_angles_deg, limits: JointLimits) -> JointAngles:
    """Normalize four raw human angles against the operator's joint ranges.

    Joint-to-joint: each human angle lands directly on the matching robot
    joint, clamped at the declared limits.
    """
    if len(glove_angles_deg) != 4:
        raise FrameRejected(f"expected 4 angles, got {len(glove_angles_deg)}")
    try:
        return JointAngles(
            mcp_side=normalize(glove_angles_deg[0], limits.mcp_side),
            mcp_fwd=normalize(glove_angles_deg[1], limits.mcp_fwd),
            pip=normalize(glove_angles_deg[2], limits.pip),
            dip=normalize(glove_angles_deg[3], limits.dip),
        )
    except ValidationError as exc:
        raise FrameRejected(str(exc)) from exc


def process_frame(
    frame: GloveFrame,
    weights: Mapping[FingerId, CalibrationWeights],
    state: PipelineState,
    cfg: RetargetConfig,
) -> MotorCommand:
    """Turn one glove frame into a rate-limited motor command.

    Rejected frames (stale timestamp, non-finite angles, faulted state)
    raise FrameRejected and leave the state untouched.
    """
    if state.status is PipelineStatus.FAULTED:
        state.frames_rejected += 1
        raise FrameRejected(f"pipeline faulted ({state.fault_reason}); reset required")
    if state.last_frame_ts is not None and frame.timestamp_ms <= state.last_frame_ts:
        state.frames_rejected += 1
        raise FrameRejected(
            f"timestamp {frame.timestamp_ms} not after last accepted {state.last_frame_ts}"
        )

    try:
        mapped = {f: map_finger(frame.per_finger[f], cfg.human_limits[f]) for f in FINGER_ORDER}
    except FrameRejected:
        state.frames_rejected += 1
        raise

    alpha = cfg.smoothing_alpha
    targets = {}
    for f in FINGER_ORDER:
        x = mapped[f]
        if state.joint_targets is None:
            targets[f] = x
        else:
            prev = state.joint_targets[f]
            targets[f] = JointAngles(
                *(
                    clamp01(alpha * xv + (1.0 - alpha) * pv)
                    for xv, pv in zip(x.as_tuple(), prev.as_tuple())
                )
            )

    forwards: dict = {f: forward_finger(targets[f], weights[f]) for f in FINGER_ORDER}

    prev_cmd = state.last_emitted
    per_finger = {}
    for f in FINGER_ORDER:
        motors = forwards[f].motors.as_tuple()
        if prev_cmd is not None and math.isfinite(cfg.max_delta_per_tick):
            prev = prev_cmd.motors(f).as_tuple()
            motors = tuple(
                p + min(cfg.max_delta_per_tick, max(-cfg.max_delta_per_tick, m - p))
                for m, p in zip(motors, prev)
            )
        per_finger[f] = MotorTriple(*motors)

    command = MotorCommand(per_finger=per_finger, timestamp_ms=frame.timestamp_ms)
    state.joint_targets = targets
    state.last_forward = forwards
    state.last_emitted = command
    state.last_frame_ts = frame.timestamp_ms
    state.status = PipelineStatus.LIVE
    state.frames_accepted += 1
    state.saturation_events += sum(sum(fr.saturated) for fr in forwards.values())
    return command


def watchdog_tick(state: PipelineState, now_ms: int, cfg: RetargetConfig) -> Optional[MotorCommand]:
    """Hold position when frames go stale.

    On the first tick past the timeout the state enters Holding and the
    last command is re-emitted unchanged (stamped with the tick time,
    which must share the frame clock). Later ticks in Holding are silent;
    the next accepted frame returns the pipeline to Live.
    """
    if state.status is not PipelineStatus.LIVE:
        return None
    if state.last_frame_ts is None or state.last_emitted is None:
        return None
    if now_ms - state.last_frame_ts <= cfg.stale_timeout_ms:
        return None
    state.status = PipelineStatus.HOLDING
    held = MotorCommand(
        per_finger=state.last_emitted.per_finger,
        timestamp_ms=max(now_ms, state.last_emitted.timestamp_ms + 1),
    )
    state.last_emitted = held
    return held


# ---------------------------------------------------------------------------
# Wrist retargeting
# ---------------------------------------------------------------------------

def _quat_conj(q):
    return (q[0], -q[1], -q[2], -q[3])


def _quat_mul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return (
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def _quat_rotate(q, v):
    return _quat_mul(_quat_mul(q, (0.0,) + tuple(v)), _quat_conj(q))[1:]


def retarget_wrist(pose: WristPose, waist_wxyz, cfg: RetargetConfig) -> WristPose:
    """Rebase a human wrist pose into the waist-aligned frame and scale it.

    The rebased translation is multiplied by the workspace scale and
    clamped into the workspace box; orientation passes through unchanged
    apart from the rebasing rotation.
    """
    waist = tuple(float(v) for v in waist_wxyz)
    norm = math.sqrt(sum(c * c for c in waist))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise ValidationError(f"waist quaternion norm {norm} deviates from 1")
    inv = _quat_conj(waist)
    rebased = _quat_rotate(inv, pose.position_m)
    scaled = tuple(v * cfg.workspace_scale for v in rebased)
    clamped = cfg.workspace_box_m.clamp(scaled)
    q = _quat_mul(inv, pose.orientation_wxyz)
    qn = math.sqrt(sum(c * c for c in q))
    q = tuple(c / qn for c in q)
    return WristPose(position_m=clamped, orientation_wxyz=q, timestamp_ms=pose.timestamp_ms)


# ---------------------------------------------------------------------------
# JSON-lines log formats
# ---------------------------------------------------------------------------

def glove_frame_to_dict(frame: GloveFrame) -> dict:
    return {
        "t": frame.timestamp_ms,
        "fingers": {f.value: list(frame.per_finger[f]) for f in FINGER_ORDER},
    }


def glove_frame_from_dict(data: dict) -> GloveFrame:
    try:
        fingers = data["fingers"]
        per_finger = {FingerId(name): tuple(angles) for name, angles in fingers.items()}
        return GloveFrame(timestamp_ms=int(data["t"]), per_finger=per_finger)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad glove frame: {exc}") from exc


def command_to_dict(command: MotorCommand) -> dict:
    return {
        "t": command.timestamp_ms,
        "motors": {f.value: list(command.motors(f).as_tuple()) for f in FINGER_ORDER},
    }


def command_from_dict(data: dict) -> MotorCommand:
    try:
        per_finger = {
            FingerId(name): MotorTriple(*values) for name, values in data["motors"].items()
        }
        return MotorCommand(per_finger=per_finger, timestamp_ms=int(data["t"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad command record: {exc}") from exc


def wrist_pose_to_dict(pose: WristPose) -> dict:
    return {"t": pose.timestamp_ms, "p": list(pose.position_m), "q": list(pose.orientation_wxyz)}


def wrist_pose_from_dict(data: dict) -> WristPose:
    try:
        return WristPose(
            position_m=tuple(data["p"]),
            orientation_wxyz=tuple(data["q"]),
            timestamp_ms=int(data["t"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad wrist record: {exc}") from exc


def iter_glove_log(fh: TextIO):
    """Yield (line_number, GloveFrame | ValidationError) per non-empty line."""
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield lineno, glove_frame_from_dict(json.loads(line))
        except (json.JSONDecodeError, ValidationError) as exc:
            yield lineno, ValidationError(f"line {lineno}: {exc}")


def command_to_json_line(command: MotorCommand) -> str:
    return json.dumps(command_to_dict(command), separators=(",", ":"))
