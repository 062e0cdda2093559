"""Teleoperation stack for a tendon-driven 16-DoF anthropomorphic soft hand.

Subpackages cover the shared hand model, joint-to-motor calibration, a
synthetic tendon-finger simulator, the glove retargeting pipeline, the
DASH-30 evaluation harness, and the CLI/session service tying them
together.
"""

from .errors import (
    ComputationError,
    ConfigurationError,
    FitError,
    FrameRejected,
    InversionError,
    SplitError,
    ValidationError,
)
from .hand_model import (
    CalibrationWeights,
    FingerId,
    HandVersion,
    JointAngles,
    JointLimits,
    MotorCommand,
    MotorTriple,
    load_hand_versions,
)

__all__ = [
    "CalibrationWeights",
    "ComputationError",
    "ConfigurationError",
    "FingerId",
    "FitError",
    "FrameRejected",
    "HandVersion",
    "InversionError",
    "JointAngles",
    "JointLimits",
    "MotorCommand",
    "MotorTriple",
    "SplitError",
    "ValidationError",
    "load_hand_versions",
]

__version__ = "0.1.0"
