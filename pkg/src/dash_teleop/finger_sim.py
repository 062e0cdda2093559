"""Synthetic tendon-driven finger standing in for the physical hardware.

Produces paired (joint, motor) data through a capstan-style excursion
model: each tendon's length change is the integral of its moment arm over
the joints it crosses, and each motor winds its tendon on a pulley. With
constant moment arms the whole chain is exactly affine in normalized
joint angles, so the calibration fit can recover it to machine precision;
an angle-dependent arm mode exists solely to exercise residual reporting.

Tendon layout mirrors the real finger: tendon 0 pulls the MCP side to
side (signed, one motor for the antagonist pair), tendon 1 folds the MCP
forward, tendon 2 runs the full finger length and curls PIP and DIP
together.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError
from .hand_model import (
    DEFAULT_JOINT_LIMITS,
    FingerId,
    JointAngles,
    JointLimits,
    MotorTriple,
    denormalize,
)
from .calibration import (
    CalibrationDataset,
    CalibrationSample,
    CalibrationWeights,
    SampleSource,
    clamp01,
)

#: Absolute ceiling on generated dataset size.
HARD_SAMPLE_CAP = 100_000


@dataclass(frozen=True)
class MomentArm:
    """Tendon moment arm, optionally linear in the joint angle: r(t) = r0 + r1*t."""

    r0_mm: float
    r1_mm: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r0_mm) and self.r0_mm > 0):
            raise ValidationError(f"moment arm r0 must be strictly positive, got {self.r0_mm!r}")
        if not math.isfinite(self.r1_mm):
            raise ValidationError("moment arm r1 must be finite")

    def excursion_mm(self, theta_rad: float) -> float:
        """Closed-form integral of r(t) dt from 0 to theta."""
        return self.r0_mm * theta_rad + 0.5 * self.r1_mm * theta_rad * theta_rad

    @property
    def is_constant(self) -> bool:
        return self.r1_mm == 0.0


def _as_arm(value) -> MomentArm:
    if isinstance(value, MomentArm):
        return value
    if isinstance(value, (int, float)):
        return MomentArm(float(value))
    if isinstance(value, (list, tuple)) and len(value) in (1, 2):
        return MomentArm(*map(float, value))
    raise ValidationError(f"cannot interpret moment arm {value!r}")


@dataclass(frozen=True)
class FingerGeometry:
    """Geometry of the synthetic finger.

    Defaults: links summing to the 100 mm finger length of the later hand
    versions, 5 mm constant arms and pulley, giving an exactly affine
    motor map whose auto-scaled motors span [0, 1] over the joint range.
    """

    link_lengths_mm: tuple = (45.0, 30.0, 25.0)
    side_moment_arm_mm: float = 5.0
    mcp_arm: MomentArm = MomentArm(5.0)
    pip_arm: MomentArm = MomentArm(5.0)
    dip_arm: MomentArm = MomentArm(5.0)
    pulley_radius_mm: float = 5.0
    #: None auto-sizes each motor's winding range to its excursion span.
    max_winding_angle_rad: Optional[float] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.link_lengths_mm) != 3:
            raise ValidationError("link_lengths_mm must hold 3 segment lengths")
        object.__setattr__(self, "link_lengths_mm", tuple(float(v) for v in self.link_lengths_mm))
        for v in self.link_lengths_mm:
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"link lengths must be strictly positive, got {v!r}")
        if not (math.isfinite(self.side_moment_arm_mm) and self.side_moment_arm_mm > 0):
            raise ValidationError("side_moment_arm_mm must be strictly positive")
        if not (math.isfinite(self.pulley_radius_mm) and self.pulley_radius_mm > 0):
            raise ValidationError("pulley_radius_mm must be strictly positive")
        if self.max_winding_angle_rad is not None and not (
            math.isfinite(self.max_winding_angle_rad) and self.max_winding_angle_rad > 0
        ):
            raise ValidationError("max_winding_angle_rad must be strictly positive when given")

    @property
    def is_affine(self) -> bool:
        return self.mcp_arm.is_constant and self.pip_arm.is_constant and self.dip_arm.is_constant


DEFAULT_GEOMETRY = FingerGeometry()


@dataclass(frozen=True)
class SimState:
    """A finger configuration bound to its geometry."""

    joints: JointAngles
    geometry: FingerGeometry

    def motors(self, limits: JointLimits = DEFAULT_JOINT_LIMITS) -> MotorTriple:
        return motors_from_state(self.joints, self.geometry, limits)

    def excursion(self, limits: JointLimits = DEFAULT_JOINT_LIMITS) -> tuple:
        return tendon_excursion(self.joints, self.geometry, limits)


def _raw_radians(joints: JointAngles, limits: JointLimits) -> tuple:
    return tuple(
        math.radians(denormalize(getattr(joints, j), limits.for_joint(j)))
        for j in ("mcp_side", "mcp_fwd", "pip", "dip")
    )


def tendon_excursion(
    joints: JointAngles,
    g: FingerGeometry,
    limits: JointLimits = DEFAULT_JOINT_LIMITS,
) -> tuple:
    """Tendon length displacement (mm) for the three tendons.

    e0 is a single signed linear term for the antagonist side pair; e1
    integrates the MCP arm over the forward fold; e2 sums the integrals
    over the two curl joints the full-length tendon crosses.
    """
    side, fwd, pip, dip = _raw_radians(joints, limits)
    e0 = g.side_moment_arm_mm * side
    e1 = g.mcp_arm.excursion_mm(fwd)
    e2 = g.pip_arm.excursion_mm(pip) + g.dip_arm.excursion_mm(dip)
    return (e0, e1, e2)


@lru_cache(maxsize=64)
def _motor_scaling(g: FingerGeometry, limits: JointLimits) -> tuple:
    """Per-motor (excursion_min, denominator) pairs; validates the geometry.

    The winding denominator is pulley_radius * max_winding_angle; when the
    winding angle is auto-sized it equals each motor's excursion span so
    the joint range maps exactly onto [0, 1]. An explicit winding angle
    that cannot absorb a motor's span is a configuration error.
    """
    lo = JointAngles(0.0, 0.0, 0.0, 0.0)
    hi = JointAngles(1.0, 1.0, 1.0, 1.0)
    for arm, joint in ((g.mcp_arm, "mcp_fwd"), (g.pip_arm, "pip"), (g.dip_arm, "dip")):
        for x in (limits.for_joint(joint).raw_min_deg, limits.for_joint(joint).raw_max_deg):
            if arm.r0_mm + arm.r1_mm * math.radians(x) <= 0:
                raise ConfigurationError(
                    f"moment arm for {joint} becomes non-positive at {x} deg; excursion not monotone"
                )
    e_lo = tendon_excursion(lo, g, limits)
    e_hi = tendon_excursion(hi, g, limits)
    spans = tuple(h - l for l, h in zip(e_lo, e_hi))
    if any(s <= 0 for s in spans):
        raise ConfigurationError(f"degenerate excursion span {spans}")
    if g.max_winding_angle_rad is None:
        denoms = spans
    else:
        denoms = (g.pulley_radius_mm * g.max_winding_angle_rad,) * 3
        for k, span in enumerate(spans):
            if span > denoms[k]:
                raise ConfigurationError(
                    f"motor{k} would exceed [0, 1] at extreme joints: excursion span "
                    f"{span:.3f} mm > pulley capacity {denoms[k]:.3f} mm"
                )
    return tuple((l, d) for l, d in zip(e_lo, denoms))


def motors_from_state(
    joints: JointAngles,
    g: FingerGeometry,
    limits: JointLimits = DEFAULT_JOINT_LIMITS,
) -> MotorTriple:
    """Normalized motor angles produced by winding each tendon's excursion."""
    scaling = _motor_scaling(g, limits)
    e = tendon_excursion(joints, g, limits)
    return MotorTriple(*(clamp01((ek - lo) / denom) for ek, (lo, denom) in zip(e, scaling)))


def implied_weights(
    g: FingerGeometry,
    limits: JointLimits = DEFAULT_JOINT_LIMITS,
) -> CalibrationWeights:
    """Closed-form affine weights of a constant-arm geometry.

    This is what a perfect fit on noiseless simulator data must recover;
    it exists only for constant arms (the nonlinear mode is not affine).
    """
    if not g.is_affine:
        raise ValidationError("implied weights are only defined for constant moment arms")
    scaling = _motor_scaling(g, limits)
    rad = math.radians
    span_side = rad(limits.mcp_side.span_deg)
    span_fwd = rad(limits.mcp_fwd.span_deg)
    span_pip = rad(limits.pip.span_deg)
    span_dip = rad(limits.dip.span_deg)
    return CalibrationWeights(
        w1=g.side_moment_arm_mm * span_side / scaling[0][1],
        w2=0.0,
        w3=0.0,
        w4=g.mcp_arm.r0_mm * span_fwd / scaling[1][1],
        w5=2.0 * g.pip_arm.r0_mm * span_pip / scaling[2][1],
        w6=2.0 * g.dip_arm.r0_mm * span_dip / scaling[2][1],
        b1=0.0,
        b2=0.0,
        b3=0.0,
        b4=0.0,
    )


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

def _grid_axes(increment_deg: float, budget: int, limits: JointLimits) -> tuple:
    """Pick per-joint sweep points: the increment is coarsened by a common
    factor until the full 4-D grid lands as close to the budget as possible."""
    spans = [limits.for_joint(j).span_deg for j in ("mcp_side", "mcp_fwd", "pip", "dip")]

    def counts(scale: float) -> tuple:
        return tuple(max(2, int(span // (increment_deg * scale)) + 1) for span in spans)

    best = None
    scale = 1.0
    while scale < 1e6:
        c = counts(scale)
        total = math.prod(c)
        if total <= HARD_SAMPLE_CAP:
            score = abs(total - budget)
            if best is None or score < best[0]:
                best = (score, scale, c)
        if total <= 16:
            break
        scale *= 1.01
    if best is None:
        raise ConfigurationError(
            f"increment {increment_deg} deg cannot produce a grid within the "
            f"{HARD_SAMPLE_CAP}-sample cap"
        )
    _, scale, c = best
    step = increment_deg * scale
    axes = []
    for span, n, joint in zip(spans, c, ("mcp_side", "mcp_fwd", "pip", "dip")):
        lo = limits.for_joint(joint).raw_min_deg
        hi = limits.for_joint(joint).raw_max_deg
        axes.append(tuple(min(lo + k * step, hi) for k in range(n)))
    return step, tuple(axes)


def generate_dataset(
    g: FingerGeometry,
    increment_deg: float = 3.0,
    noise_sigma: float = 0.0,
    budget: int = 1000,
    mode: str = "grid",
    seed: Optional[int] = None,
    limits: JointLimits = DEFAULT_JOINT_LIMITS,
    finger: FingerId = FingerId.INDEX,
) -> CalibrationDataset:
    """Generate a paired (joint, motor) dataset from the simulator.

    Grid mode sweeps all four joints deterministically at the (coarsened)
    increment; random mode draws `budget` configurations uniformly, which
    is the mode of choice for noise experiments. Gaussian noise with
    std `noise_sigma` is added to motor values only, then clamped.
    """
    if not (math.isfinite(increment_deg) and increment_deg > 0):
        raise ValidationError(f"increment must be positive, got {increment_deg!r}")
    if noise_sigma < 0 or not math.isfinite(noise_sigma):
        raise ValidationError(f"noise sigma must be non-negative, got {noise_sigma!r}")
    if budget < 1 or budget > HARD_SAMPLE_CAP:
        raise ConfigurationError(f"sample budget {budget} outside [1, {HARD_SAMPLE_CAP}]")
    _motor_scaling(g, limits)  # surface configuration errors before sampling

    rng = np.random.default_rng(g.seed if seed is None else seed)
    if mode == "grid":
        step, axes = _grid_axes(increment_deg, budget, limits)
        norm_axes = [
            tuple(
                (v - limits.for_joint(j).raw_min_deg) / limits.for_joint(j).span_deg
                for v in axis
            )
            for axis, j in zip(axes, ("mcp_side", "mcp_fwd", "pip", "dip"))
        ]
        joint_rows = itertools.product(*norm_axes)
        effective_increment = step
    elif mode == "random":
        joint_rows = (tuple(row) for row in rng.uniform(0.0, 1.0, size=(budget, 4)))
        effective_increment = 0.0
    else:
        raise ValidationError(f"unknown sampling mode {mode!r}")

    samples = []
    for row in joint_rows:
        joints = JointAngles(*row)
        motors = motors_from_state(joints, g, limits)
        values = motors.as_tuple()
        if noise_sigma > 0:
            values = tuple(clamp01(v + n) for v, n in zip(values, rng.normal(0.0, noise_sigma, 3)))
        samples.append(
            CalibrationSample(joints=joints, motors=MotorTriple(*values), source=SampleSource.SIMULATED)
        )
    return CalibrationDataset(finger=finger, samples=tuple(samples), increment_deg=effective_increment)


# ---------------------------------------------------------------------------
# Rendering support
# ---------------------------------------------------------------------------

def fingertip_positions(
    joints: JointAngles,
    g: FingerGeometry,
    limits: JointLimits = DEFAULT_JOINT_LIMITS,
) -> tuple:
    """Planar forward kinematics of the finger for console rendering.

    Returns ([base, pip, dip, tip] as (x, y) mm points, splay_deg). The
    finger bends at the creases: flexion rotates toward negative y, and
    the side splay is reported separately as an out-of-plane angle.
    """
    side_deg, fwd_deg, pip_deg, dip_deg = joints.raw_degrees(limits)
    points = [(0.0, 0.0)]
    heading = 0.0
    for length, angle_deg in zip(g.link_lengths_mm, (fwd_deg, pip_deg, dip_deg)):
        heading -= math.radians(angle_deg)
        x, y = points[-1]
        points.append((x + length * math.cos(heading), y + length * math.sin(heading)))
    return points, side_deg


# ---------------------------------------------------------------------------
# Geometry files
# ---------------------------------------------------------------------------

def geometry_to_dict(g: FingerGeometry) -> dict:
    def arm(a: MomentArm):
        return a.r0_mm if a.is_constant else [a.r0_mm, a.r1_mm]

    out = {
        "link_lengths_mm": list(g.link_lengths_mm),
        "moment_arms_mm": [arm(g.mcp_arm), arm(g.pip_arm), arm(g.dip_arm)],
        "pulley_radius_mm": g.pulley_radius_mm,
        "side_moment_arm_mm": g.side_moment_arm_mm,
        "seed": g.seed,
    }
    if g.max_winding_angle_rad is not None:
        out["max_winding_angle_rad"] = g.max_winding_angle_rad
    return out


def geometry_from_dict(data: dict) -> FingerGeometry:
    known = {
        "link_lengths_mm",
        "moment_arms_mm",
        "pulley_radius_mm",
        "side_moment_arm_mm",
        "seed",
        "max_winding_angle_rad",
    }
    extra = set(data) - known
    if extra:
        raise ValidationError(f"unknown geometry keys: {sorted(extra)}")
    kwargs = {}
    if "link_lengths_mm" in data:
        kwargs["link_lengths_mm"] = tuple(data["link_lengths_mm"])
    if "moment_arms_mm" in data:
        arms = data["moment_arms_mm"]
        if len(arms) != 3:
            raise ValidationError("moment_arms_mm must list arms for mcp_fwd, pip, dip")
        kwargs["mcp_arm"], kwargs["pip_arm"], kwargs["dip_arm"] = (_as_arm(a) for a in arms)
    for key in ("pulley_radius_mm", "side_moment_arm_mm", "max_winding_angle_rad"):
        if key in data:
            kwargs[key] = float(data[key])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    return FingerGeometry(**kwargs)


def load_geometry(path) -> FingerGeometry:
    with open(path, "r", encoding="utf-8") as fh:
        return geometry_from_dict(json.load(fh))
