"""Session service hosting the live teleoperation loop.

One bidirectional stream per operator session at /session: the client
sends Frame messages (virtual-glove joint angles in degrees), the server
answers with Command and HandPose messages on every tick, plus Status
messages for state transitions and errors. Request/response endpoints
expose the task registry, trial marks, and the evaluation report.

Every stream message is a single-line JSON envelope
{"kind", "session", "seq", "payload"} with per-direction monotonically
increasing sequence numbers, so a captured stream doubles as a log file.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .calibration import invert_mcp, split_curl, clamp01
from .errors import ConfigurationError, FrameRejected, InversionError, SplitError, ValidationError
from .evaluation import (
    REPS_PER_TASK,
    TASK_COUNT,
    TrialRecord,
    aggregate,
    load_task_registry,
    results_table_to_dict,
)
from .finger_sim import DEFAULT_GEOMETRY, FingerGeometry, fingertip_positions, geometry_from_dict
from .hand_model import (
    FINGER_ORDER,
    KNOWN_HAND_NAMES,
    FingerId,
    JointAngles,
    JointLimits,
    load_hand_versions,
)
from .retargeting import (
    GloveFrame,
    PipelineState,
    PipelineStatus,
    RetargetConfig,
    WorkspaceBox,
    command_to_dict,
    glove_frame_from_dict,
    process_frame,
    watchdog_tick,
)

#: Pose rendered before the first frame: centered splay, straight finger.
IDLE_JOINTS = JointAngles(0.5, 0.0, 0.0, 0.0)


def _mono_ms() -> int:
    return time.monotonic_ns() // 1_000_000


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def retarget_config_from_dict(data: dict) -> RetargetConfig:
    kwargs = {}
    plain = {
        "smoothing_alpha": float,
        "max_delta_per_tick": float,
        "tick_ms": int,
        "workspace_scale": float,
        "stale_timeout_ms": int,
    }
    for key, cast in plain.items():
        if key in data:
            kwargs[key] = cast(data[key])
    if "workspace_box_m" in data:
        lo, hi = data["workspace_box_m"]
        kwargs["workspace_box_m"] = WorkspaceBox(tuple(lo), tuple(hi))
    if "robot_limits" in data:
        kwargs["robot_limits"] = JointLimits.from_dict(data["robot_limits"])
    if "human_limits" in data:
        hl = data["human_limits"]
        if set(hl) <= {j for j in ("mcp_side", "mcp_fwd", "pip", "dip")}:
            shared = JointLimits.from_dict(hl)
            kwargs["human_limits"] = {f: shared for f in FINGER_ORDER}
        else:
            kwargs["human_limits"] = {
                FingerId(name): JointLimits.from_dict(v) for name, v in hl.items()
            }
    known = set(plain) | {"workspace_box_m", "robot_limits", "human_limits"}
    extra = set(data) - known
    if extra:
        raise ConfigurationError(f"unknown retarget config keys: {sorted(extra)}")
    return RetargetConfig(**kwargs)


@dataclass
class SessionConfig:
    """Service wiring: which hand version to drive, with what pipeline
    parameters and simulator geometry, listening where."""

    hand_version: str = "v1"
    retarget: RetargetConfig = field(default_factory=RetargetConfig)
    geometry: FingerGeometry = DEFAULT_GEOMETRY
    listen_address: str = "127.0.0.1:8765"
    trials_path: str = "trials.jsonl"

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        known = {"hand_version", "retarget", "geometry", "listen_address", "trials_file"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        kwargs = {}
        if "hand_version" in data:
            kwargs["hand_version"] = str(data["hand_version"])
        if "retarget" in data:
            kwargs["retarget"] = retarget_config_from_dict(data["retarget"])
        if "geometry" in data:
            kwargs["geometry"] = geometry_from_dict(data["geometry"])
        if "listen_address" in data:
            kwargs["listen_address"] = str(data["listen_address"])
        if "trials_file" in data:
            kwargs["trials_path"] = str(data["trials_file"])
        return cls(**kwargs)

    @property
    def host_port(self) -> tuple:
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"listen_address must be host:port, got {self.listen_address!r}")
        return host, int(port)


def load_session_config(path: Optional[str]) -> SessionConfig:
    if path is None:
        return SessionConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return SessionConfig.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Trial mark store
# ---------------------------------------------------------------------------

def _validate_mark(data: dict) -> dict:
    try:
        hand = str(data["hand"])
        task = int(data["task"])
        rep = int(data["rep"])
        success = data["success"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad trial mark: {exc}") from exc
    if hand not in KNOWN_HAND_NAMES:
        raise ValidationError(f"unknown hand {hand!r}")
    if not 1 <= task <= TASK_COUNT:
        raise ValidationError(f"task must lie in 1..{TASK_COUNT}, got {task}")
    if not 1 <= rep <= REPS_PER_TASK:
        raise ValidationError(f"rep must lie in 1..{REPS_PER_TASK}, got {rep}")
    if success is not None and not isinstance(success, bool):
        raise ValidationError(f"success must be true, false, or null (unmark), got {success!r}")
    return {
        "hand": hand,
        "task": task,
        "rep": rep,
        "success": success,
        "t": int(data.get("t", 0)),
        "notes": str(data.get("notes", "")),
    }


class TrialStore:
    """Append-only JSON-lines store for trial marks.

    Re-marking appends a new line; reads compact to the latest mark per
    (hand, task, rep), and a null success acts as an unmark tombstone.
    Writes are serialized across sessions.
    """

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._marks: dict = {}
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        mark = _validate_mark(json.loads(line))
                    except (json.JSONDecodeError, ValidationError) as exc:
                        raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
                    self._apply(mark)
        except FileNotFoundError:
            pass

    def _apply(self, mark: dict) -> None:
        key = (mark["hand"], mark["task"], mark["rep"])
        if mark["success"] is None:
            self._marks.pop(key, None)
        else:
            self._marks[key] = mark

    def append(self, data: dict) -> dict:
        mark = _validate_mark(data)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(mark, separators=(",", ":")) + "\n")
            self._apply(mark)
        return mark

    def marks(self) -> list:
        with self._lock:
            return sorted(self._marks.values(), key=lambda m: (m["hand"], m["task"], m["rep"]))

    def records(self) -> list:
        return [
            TrialRecord(
                hand=m["hand"],
                task_id=m["task"],
                rep=m["rep"],
                success=m["success"],
                notes=m["notes"],
                timestamp_ms=m["t"],
            )
            for m in self.marks()
        ]


# ---------------------------------------------------------------------------
# Stream session
# ---------------------------------------------------------------------------

class StreamSession:
    """Per-connection state: pipeline, outgoing queue, sequence counters."""

    def __init__(self, session_id: str):
        self.id = session_id
        self.state = PipelineState()
        self.outbox: list = []
        self.seq = 0
        self.last_client_seq: Optional[int] = None
        self.last_rx_mono_ms: Optional[int] = None
        self.lock = asyncio.Lock()

    def envelope(self, kind: str, payload: dict) -> str:
        self.seq += 1
        message = {"kind": kind, "session": self.id, "seq": self.seq, "payload": payload}
        return json.dumps(message, separators=(",", ":"))


def _display_joints(session: StreamSession, weights) -> dict:
    """Joints to render: the emitted (rate-limited) motors mapped back
    through the inverse model, so the view tracks what was commanded."""
    cmd = session.state.last_emitted
    if cmd is None:
        return {f: IDLE_JOINTS for f in FINGER_ORDER}
    joints = {}
    for f in FINGER_ORDER:
        m = cmd.motors(f)
        try:
            side, fwd = invert_mcp(m.motor0, m.motor1, weights[f])
            pip, dip = split_curl(m.motor2, weights[f])
            joints[f] = JointAngles(clamp01(side), clamp01(fwd), clamp01(pip), clamp01(dip))
        except (InversionError, SplitError):
            targets = session.state.joint_targets
            joints[f] = targets[f] if targets else IDLE_JOINTS
    return joints


def _hand_pose_payload(session: StreamSession, app_state, t_ms: int) -> dict:
    joints = _display_joints(session, app_state.weights)
    cmd = session.state.last_emitted
    fingers = {}
    for f in FINGER_ORDER:
        points, splay = fingertip_positions(joints[f], app_state.geometry, app_state.cfg.robot_limits)
        entry = {
            "points": [[x, y] for x, y in points],
            "splay_deg": splay,
        }
        fwd_result = session.state.last_forward.get(f)
        if fwd_result is not None and cmd is not None:
            entry["raw"] = list(fwd_result.raw)
            entry["clamped"] = list(cmd.motors(f).as_tuple())
            entry["saturated"] = list(fwd_result.saturated)
        else:
            entry["raw"] = entry["clamped"] = entry["saturated"] = None
        fingers[f.value] = entry
    return {"t": t_ms, "state": session.state.status.value, "fingers": fingers}


def create_app(cfg: SessionConfig) -> FastAPI:
    versions = load_hand_versions()
    if cfg.hand_version not in versions or versions[cfg.hand_version].weights is None:
        raise ConfigurationError(
            f"hand version {cfg.hand_version!r} has no calibration weights to serve"
        )

    app = FastAPI(title="dash-teleop session service")
    app.state.cfg = cfg.retarget
    app.state.weights = versions[cfg.hand_version].weights
    app.state.geometry = cfg.geometry
    app.state.hand_version = cfg.hand_version
    app.state.tasks = load_task_registry()
    app.state.trials = TrialStore(cfg.trials_path)
    app.state.sessions: dict = {}

    @app.get("/status")
    async def status():
        return {
            "status": "ok",
            "hand_version": app.state.hand_version,
            "tick_ms": app.state.cfg.tick_ms,
            "sessions": len(app.state.sessions),
        }

    @app.get("/tasks")
    async def tasks():
        return [
            {
                "id": t.id,
                "name": t.name,
                "category": t.category.value,
                "compliance_flagged": t.compliance_flagged,
            }
            for t in app.state.tasks
        ]

    @app.post("/trials")
    async def post_trial(mark: dict):
        try:
            stored = app.state.trials.append(mark)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"ok": True, "mark": stored, "count": len(app.state.trials.marks())}

    @app.get("/trials")
    async def get_trials():
        return {"marks": app.state.trials.marks()}

    @app.get("/report")
    async def report(strict: bool = False):
        table = aggregate(app.state.trials.records(), strict=strict, registry=app.state.tasks)
        return results_table_to_dict(table)

    @app.websocket("/session")
    async def session_stream(ws: WebSocket):
        await ws.accept()
        session = StreamSession(uuid.uuid4().hex[:12])
        app.state.sessions[session.id] = session
        hello = {
            "state": session.state.status.value,
            "detail": "connected",
            "hand_version": app.state.hand_version,
            "tick_ms": app.state.cfg.tick_ms,
            "stale_timeout_ms": app.state.cfg.stale_timeout_ms,
            "max_delta_per_tick": app.state.cfg.max_delta_per_tick,
            "human_limits": {
                f.value: app.state.cfg.human_limits[f].as_dict() for f in FINGER_ORDER
            },
        }
        await ws.send_text(session.envelope("Status", hello))
        ticker = asyncio.create_task(_run_ticker(ws, session, app.state))
        try:
            while True:
                text = await ws.receive_text()
                reply = await _handle_client_message(session, app.state, text)
                if reply is not None:
                    await ws.send_text(reply)
        except WebSocketDisconnect:
            pass
        finally:
            ticker.cancel()
            app.state.sessions.pop(session.id, None)

    return app


async def _handle_client_message(session: StreamSession, app_state, text: str) -> Optional[str]:
    """Apply one client message; malformed input earns a Status(error) reply
    instead of killing the session."""

    def error(detail: str) -> str:
        return session.envelope("Status", {"state": "error", "detail": detail})

    try:
        message = json.loads(text)
    except json.JSONDecodeError as exc:
        return error(f"invalid JSON: {exc}")
    if not isinstance(message, dict) or "kind" not in message or "payload" not in message:
        return error("message must be an object with kind and payload")
    if message.get("session") not in (None, session.id):
        return error(f"session id mismatch (this session is {session.id})")
    seq = message.get("seq")
    if not isinstance(seq, int):
        return error("message must carry an integer seq")

    async with session.lock:
        if session.last_client_seq is not None and seq <= session.last_client_seq:
            return error(f"seq {seq} not after {session.last_client_seq}")
        session.last_client_seq = seq

        kind = message["kind"]
        if kind == "Frame":
            try:
                frame = glove_frame_from_dict(message["payload"])
                command = process_frame(frame, app_state.weights, session.state, app_state.cfg)
            except (ValidationError, FrameRejected) as exc:
                return error(f"frame rejected: {exc}")
            session.last_rx_mono_ms = _mono_ms()
            session.outbox.append(command)
            return None
        if kind == "TrialMark":
            try:
                stored = app_state.trials.append(message["payload"])
            except ValidationError as exc:
                return error(f"trial mark rejected: {exc}")
            return session.envelope("Status", {"state": "ok", "detail": "mark stored", "mark": stored})
        return error(f"unknown message kind {kind!r}")


async def _run_ticker(ws: WebSocket, session: StreamSession, app_state) -> None:
    """Fixed-rate loop: run the watchdog, flush pending commands, emit the
    rendered hand pose. Output rate is tick-driven regardless of input jitter."""
    cfg = app_state.cfg
    try:
        while True:
            await asyncio.sleep(cfg.tick_ms / 1000.0)
            messages = []
            async with session.lock:
                state = session.state
                was = state.status
                if state.last_frame_ts is not None and session.last_rx_mono_ms is not None:
                    frame_now = state.last_frame_ts + (_mono_ms() - session.last_rx_mono_ms)
                    held = watchdog_tick(state, frame_now, cfg)
                    if held is not None:
                        session.outbox.append(held)
                if state.status is not was:
                    messages.append(
                        session.envelope(
                            "Status", {"state": state.status.value, "detail": "input stale; holding"}
                        )
                    )
                for command in session.outbox:
                    messages.append(session.envelope("Command", command_to_dict(command)))
                session.outbox.clear()
                t_ms = state.last_frame_ts if state.last_frame_ts is not None else _mono_ms()
                messages.append(
                    session.envelope("HandPose", _hand_pose_payload(session, app_state, t_ms))
                )
            for m in messages:
                await ws.send_text(m)
    except asyncio.CancelledError:
        pass
