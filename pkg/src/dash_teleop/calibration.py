"""Kinematic calibration model: forward joint-to-motor maps, least-squares
fitting from paired samples, and the inverse queries used for display.

The model is affine and block-structured. The two MCP motors are driven
jointly from (mcp_side, mcp_fwd) because side splay restricts the forward
fold; the single curl motor is the average of two affine terms in pip and
dip because one full-length tendon drives both curl joints:

    motor0 = w1*mcp_side + w3*mcp_fwd + b1
    motor1 = w2*mcp_side + w4*mcp_fwd + b2
    motor2 = (pip*w5 + b3)/2 + (dip*w6 + b4)/2

Raw (unclamped) outputs may leave [0, 1]; clamping happens only at the
command boundary (`forward_finger`) so affine properties stay testable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import FitError, InversionError, SplitError, ValidationError
from .hand_model import (
    DET_EPSILON,
    FINGER_ORDER,
    CalibrationWeights,
    FingerId,
    JointAngles,
    MotorTriple,
)

#: Minimum number of samples accepted by `fit`.
MIN_FIT_SAMPLES = 10

#: Regressor condition number above which a sub-fit is declared degenerate.
CONDITION_THRESHOLD = 1e8

#: Magnitude below which w5 + w6 makes the curl motor unsplittable.
CURL_SUM_EPSILON = 1e-9

DATASET_CSV_HEADER = "finger,mcp_side,mcp_fwd,pip,dip,motor0,motor1,motor2"


class SampleSource(Enum):
    SIMULATED = "simulated"
    IMPORTED = "imported"


@dataclass(frozen=True)
class CalibrationSample:
    """One paired observation: normalized joint angles and motor angles."""

    joints: JointAngles
    motors: MotorTriple
    source: SampleSource = SampleSource.IMPORTED


@dataclass(frozen=True)
class CalibrationDataset:
    """Ordered samples for one finger plus sweep metadata."""

    finger: FingerId
    samples: tuple
    increment_deg: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def count(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FitReport:
    """Fitted weights plus per-motor residual RMSE on the training data."""

    weights: CalibrationWeights
    rmse: tuple
    sample_count: int

    def __post_init__(self) -> None:
        if len(self.rmse) != 3 or any(not (math.isfinite(r) and r >= 0) for r in self.rmse):
            raise ValidationError(f"rmse must be 3 non-negative finite values, got {self.rmse!r}")
        object.__setattr__(self, "rmse", tuple(float(r) for r in self.rmse))


@dataclass(frozen=True)
class ForwardResult:
    """Clamped motor triple plus the raw values and per-motor saturation flags."""

    motors: MotorTriple
    raw: tuple
    saturated: tuple


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{what} must be finite, got {value!r}")
    return float(value)


# ---------------------------------------------------------------------------
# Forward maps
# ---------------------------------------------------------------------------

def forward_mcp(joints: JointAngles, w: CalibrationWeights) -> tuple:
    """Raw (unclamped) motor0/motor1 values for the MCP block."""
    motor0 = w.w1 * joints.mcp_side + w.w3 * joints.mcp_fwd + w.b1
    motor1 = w.w2 * joints.mcp_side + w.w4 * joints.mcp_fwd + w.b2
    return (motor0, motor1)


def forward_curl(pip: float, dip: float, w: CalibrationWeights) -> float:
    """Raw motor2 value: average of the pip and dip affine terms."""
    _require_finite(pip, "pip")
    _require_finite(dip, "dip")
    return (pip * w.w5 + w.b3) / 2.0 + (dip * w.w6 + w.b4) / 2.0


def forward_finger(joints: JointAngles, w: CalibrationWeights) -> ForwardResult:
    """Full forward map, clamped to [0, 1] with saturation flags."""
    m0, m1 = forward_mcp(joints, w)
    m2 = forward_curl(joints.pip, joints.dip, w)
    raw = (m0, m1, m2)
    clamped = tuple(clamp01(m) for m in raw)
    saturated = tuple(c != r for c, r in zip(clamped, raw))
    return ForwardResult(motors=MotorTriple(*clamped), raw=raw, saturated=saturated)


# ---------------------------------------------------------------------------
# Inverse queries
# ---------------------------------------------------------------------------

def invert_mcp(motor0: float, motor1: float, w: CalibrationWeights) -> tuple:
    """Solve the 2x2 MCP block for (mcp_side, mcp_fwd).

    Exact inverse of `forward_mcp` for unclamped values; requires the
    block determinant to clear DET_EPSILON.
    """
    _require_finite(motor0, "motor0")
    _require_finite(motor1, "motor1")
    det = w.det
    if abs(det) <= DET_EPSILON:
        raise InversionError(f"MCP block is singular (|det| = {abs(det):.3g} <= {DET_EPSILON:g})")
    r0 = motor0 - w.b1
    r1 = motor1 - w.b2
    side = (w.w4 * r0 - w.w3 * r1) / det
    fwd = (-w.w2 * r0 + w.w1 * r1) / det
    return (side, fwd)


def split_curl(motor2: float, w: CalibrationWeights) -> tuple:
    """Split the curl motor back into (pip, dip) assuming equal angles.

    The curl map is many-to-one; under pip == dip == theta it reduces to
    theta = (2*motor2 - b3 - b4) / (w5 + w6), clamped to [0, 1].
    """
    _require_finite(motor2, "motor2")
    s = w.w5 + w.w6
    if abs(s) < CURL_SUM_EPSILON:
        raise SplitError(f"w5 + w6 = {s:.3g} is too small to split the curl motor")
    theta = clamp01((2.0 * motor2 - w.b3 - w.b4) / s)
    return (theta, theta)


# ---------------------------------------------------------------------------
# Least-squares fitting
# ---------------------------------------------------------------------------

def _affine_lstsq(x1, x2, y, label: str):
    """OLS for y ~ a*x1 + b*x2 + c via SVD, with a conditioning gate."""
    a = np.column_stack([x1, x2, np.ones_like(x1)])
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > CONDITION_THRESHOLD:
        raise FitError(
            f"rank-deficient regressor for the {label} sub-fit "
            f"(condition number {math.inf if sv[-1] == 0 else sv[0] / sv[-1]:.3g})"
        )
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    residual = a @ coef - y
    rmse = float(np.sqrt(np.mean(residual**2)))
    return coef, rmse


def fit(dataset: CalibrationDataset) -> FitReport:
    """Fit the affine model to paired data by ordinary least squares.

    Three independent sub-fits: motor0 and motor1 each against
    (mcp_side, mcp_fwd), and 2*motor2 against (pip, dip). The curl
    regression identifies only b3 + b4; the sum is split evenly, which is
    observationally irrelevant because the forward map only uses the sum.
    """
    n = dataset.count
    if n < MIN_FIT_SAMPLES:
        raise ValidationError(f"fit requires at least {MIN_FIT_SAMPLES} samples, got {n}")
    joints = np.array([s.joints.as_tuple() for s in dataset.samples])
    motors = np.array([s.motors.as_tuple() for s in dataset.samples])
    side, fwd, pip, dip = joints.T

    coef0, rmse0 = _affine_lstsq(side, fwd, motors[:, 0], "motor0 ~ (mcp_side, mcp_fwd)")
    coef1, rmse1 = _affine_lstsq(side, fwd, motors[:, 1], "motor1 ~ (mcp_side, mcp_fwd)")
    coef2, rmse2_scaled = _affine_lstsq(pip, dip, 2.0 * motors[:, 2], "motor2 ~ (pip, dip)")

    bias_sum = coef2[2]
    weights = CalibrationWeights(
        w1=float(coef0[0]),
        w2=float(coef1[0]),
        w3=float(coef0[1]),
        w4=float(coef1[1]),
        w5=float(coef2[0]),
        w6=float(coef2[1]),
        b1=float(coef0[2]),
        b2=float(coef1[2]),
        b3=float(bias_sum) / 2.0,
        b4=float(bias_sum) / 2.0,
    )
    # the curl sub-fit regressed 2*motor2, so its residual scale is doubled
    return FitReport(weights=weights, rmse=(rmse0, rmse1, rmse2_scaled / 2.0), sample_count=n)


def fit_all(datasets: Iterable[CalibrationDataset]) -> dict:
    """Fit every per-finger dataset; returns FingerId -> FitReport."""
    out = {}
    for ds in datasets:
        try:
            out[ds.finger] = fit(ds)
        except (FitError, ValidationError) as exc:
            raise type(exc)(f"{ds.finger.value}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Dataset and report files
# ---------------------------------------------------------------------------

def write_dataset_csv(datasets: Sequence[CalibrationDataset], path) -> None:
    """Write per-finger samples as CSV, one sample per row.

    Values are written with full round-trip precision so a noiseless
    generate/fit oracle chain survives the file boundary.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DATASET_CSV_HEADER + "\n")
        for ds in datasets:
            for s in ds.samples:
                row = s.joints.as_tuple() + s.motors.as_tuple()
                fh.write(ds.finger.value + "," + ",".join(repr(float(v)) for v in row) + "\n")


def read_dataset_csv(path, increment_deg: float = 0.0) -> dict:
    """Parse a calibration CSV into per-finger datasets (FingerId -> dataset)."""
    per_finger = {f: [] for f in FINGER_ORDER}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != DATASET_CSV_HEADER:
            raise ValidationError(f"bad dataset header: expected {DATASET_CSV_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ValidationError(f"line {lineno}: expected 8 columns, got {len(parts)}")
            try:
                finger = FingerId(parts[0])
                values = [float(p) for p in parts[1:]]
                sample = CalibrationSample(
                    joints=JointAngles(*values[:4]),
                    motors=MotorTriple(*values[4:]),
                    source=SampleSource.IMPORTED,
                )
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            per_finger[finger].append(sample)
    return {
        f: CalibrationDataset(finger=f, samples=tuple(rows), increment_deg=increment_deg)
        for f, rows in per_finger.items()
        if rows
    }


def fit_report_to_dict(report: FitReport, version: str) -> dict:
    """Serialize a fit report: the weights-file schema plus rmse and n."""
    w, b = report.weights.as_wb()
    return {
        "version": version,
        "w": list(w),
        "b": list(b),
        "rmse": list(report.rmse),
        "n": report.sample_count,
    }


def write_fit_reports(reports: dict, path) -> None:
    """Write per-finger fit reports as a JSON array ordered by finger."""
    payload = [
        fit_report_to_dict(reports[f], version=f"fit-{f.value}")
        for f in FINGER_ORDER
        if f in reports
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
