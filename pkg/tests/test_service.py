import json

import pytest
from fastapi.testclient import TestClient

from dash_teleop.hand_model import FINGER_ORDER, FingerId
from dash_teleop.retargeting import (
    GloveFrame,
    PipelineState,
    RetargetConfig,
    command_to_dict,
    glove_frame_to_dict,
    process_frame,
)
from dash_teleop.service import SessionConfig, TrialStore, create_app, retarget_config_from_dict
from dash_teleop.errors import ConfigurationError, ValidationError

HUMAN_MIN = (-30.0, 0.0, 0.0, 0.0)
HUMAN_MAX = (30.0, 90.0, 100.0, 90.0)


def make_client(tmp_path, **kwargs):
    cfg = SessionConfig(trials_path=str(tmp_path / "trials.jsonl"), **kwargs)
    return TestClient(create_app(cfg))


def frame_payload(t, angles):
    frame = GloveFrame(timestamp_ms=t, per_finger={f: tuple(angles) for f in FINGER_ORDER})
    return glove_frame_to_dict(frame)


def envelope(kind, seq, payload):
    return json.dumps({"kind": kind, "seq": seq, "payload": payload})


def read_until(ws, kind, limit=200):
    for _ in range(limit):
        message = ws.receive_json()
        if message["kind"] == kind:
            return message
    raise AssertionError(f"no {kind} message within {limit} messages")


class TestRequestEndpoints:
    def test_status(self, tmp_path):
        client = make_client(tmp_path)
        body = client.get("/status").json()
        assert body["status"] == "ok"
        assert body["hand_version"] == "v1"
        assert body["tick_ms"] == 16

    def test_tasks_lists_all_thirty(self, tmp_path):
        client = make_client(tmp_path)
        tasks = client.get("/tasks").json()
        assert len(tasks) == 30
        assert tasks[0] == {"id": 1, "name": "Scissor", "category": "Hold", "compliance_flagged": False}

    def test_trial_read_your_writes(self, tmp_path):
        client = make_client(tmp_path)
        mark = {"hand": "v5", "task": 6, "rep": 1, "success": True}
        assert client.post("/trials", json=mark).status_code == 200
        marks = client.get("/trials").json()["marks"]
        assert len(marks) == 1 and marks[0]["task"] == 6
        report = client.get("/report").json()
        row = next(r for r in report["rows"] if r["hand"] == "v5")
        assert row["successes"] == 1

    def test_invalid_mark_rejected(self, tmp_path):
        client = make_client(tmp_path)
        assert client.post("/trials", json={"hand": "v9", "task": 1, "rep": 1, "success": True}).status_code == 400
        assert client.post("/trials", json={"hand": "v1", "task": 0, "rep": 1, "success": True}).status_code == 400
        assert client.post("/trials", json={"hand": "v1", "task": 1, "rep": 1, "success": "yes"}).status_code == 400

    def test_five_of_five_increments_fully_solved(self, tmp_path):
        client = make_client(tmp_path)
        for rep in range(1, 6):
            client.post("/trials", json={"hand": "v5", "task": 6, "rep": rep, "success": True})
        report = client.get("/report").json()
        row = next(r for r in report["rows"] if r["hand"] == "v5")
        assert row["tasks_fully_solved"] == 1

    def test_unmark_tombstone(self, tmp_path):
        client = make_client(tmp_path)
        mark = {"hand": "v2", "task": 3, "rep": 2, "success": True}
        client.post("/trials", json=mark)
        client.post("/trials", json={**mark, "success": None})
        assert client.get("/trials").json()["marks"] == []

    def test_remark_last_write_wins(self, tmp_path):
        client = make_client(tmp_path)
        mark = {"hand": "v2", "task": 3, "rep": 2, "success": True}
        client.post("/trials", json=mark)
        client.post("/trials", json={**mark, "success": False})
        marks = client.get("/trials").json()["marks"]
        assert len(marks) == 1 and marks[0]["success"] is False

    def test_baseline_without_weights_cannot_serve(self, tmp_path):
        with pytest.raises(ConfigurationError):
            make_client(tmp_path, hand_version="allegro")


class TestTrialStore:
    def test_persists_compacted_across_restart(self, tmp_path):
        path = str(tmp_path / "trials.jsonl")
        store = TrialStore(path)
        store.append({"hand": "v1", "task": 1, "rep": 1, "success": True})
        store.append({"hand": "v1", "task": 1, "rep": 1, "success": False})
        store.append({"hand": "v1", "task": 2, "rep": 1, "success": True})
        store.append({"hand": "v1", "task": 2, "rep": 1, "success": None})
        # the file keeps the full append history
        assert len(open(path).read().strip().splitlines()) == 4
        reloaded = TrialStore(path)
        marks = reloaded.marks()
        assert len(marks) == 1
        assert marks[0]["task"] == 1 and marks[0]["success"] is False

    def test_rejects_bad_marks(self, tmp_path):
        store = TrialStore(str(tmp_path / "t.jsonl"))
        with pytest.raises(ValidationError):
            store.append({"hand": "v1", "task": 1, "rep": 7, "success": True})


class TestSessionStream:
    def test_hello_carries_session_and_limits(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            hello = ws.receive_json()
            assert hello["kind"] == "Status"
            assert hello["seq"] == 1
            assert hello["payload"]["state"] == "live"
            assert hello["payload"]["human_limits"]["thumb"]["mcp_fwd"] == [0.0, 90.0]
            assert hello["session"]

    def test_zero_pose_frame_yields_v1_bias_command(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text(envelope("Frame", 1, frame_payload(16, HUMAN_MIN)))
            command = read_until(ws, "Command")
            for finger in ("thumb", "index", "middle", "ring"):
                assert command["payload"]["motors"][finger] == pytest.approx(
                    [0.47, 0.0, 0.01], abs=1e-9
                )
            assert command["payload"]["t"] == 16

    def test_hand_pose_streams_every_tick(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            pose = read_until(ws, "HandPose")
            fingers = pose["payload"]["fingers"]
            assert set(fingers) == {"thumb", "index", "middle", "ring"}
            assert len(fingers["index"]["points"]) == 4
            # straight finger before any command
            tip = fingers["index"]["points"][-1]
            assert tip[0] == pytest.approx(100.0, abs=1e-6)

    def test_saturation_reported_in_hand_pose(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text(envelope("Frame", 1, frame_payload(16, HUMAN_MIN)))
            read_until(ws, "Command")
            pose = read_until(ws, "HandPose")
            index = pose["payload"]["fingers"]["index"]
            assert index["saturated"] == [False, True, False]
            assert index["raw"][1] == pytest.approx(-0.07, abs=1e-9)

    def test_stale_seq_answered_with_error(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text(envelope("Frame", 5, frame_payload(16, HUMAN_MIN)))
            ws.send_text(envelope("Frame", 5, frame_payload(32, HUMAN_MIN)))
            status = read_until(ws, "Status")
            assert status["payload"]["state"] == "error"
            assert "seq" in status["payload"]["detail"]

    def test_malformed_message_answered_without_killing_session(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text("not json")
            status = read_until(ws, "Status")
            assert status["payload"]["state"] == "error"
            ws.send_text(envelope("Frame", 1, frame_payload(16, HUMAN_MIN)))
            assert read_until(ws, "Command")

    def test_out_of_order_frame_rejected_via_status(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text(envelope("Frame", 1, frame_payload(32, HUMAN_MIN)))
            read_until(ws, "Command")
            ws.send_text(envelope("Frame", 2, frame_payload(16, HUMAN_MIN)))
            status = read_until(ws, "Status")
            assert "rejected" in status["payload"]["detail"]

    def test_two_sessions_are_independent(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as a, client.websocket_connect("/session") as b:
            hello_a = a.receive_json()
            hello_b = b.receive_json()
            assert hello_a["session"] != hello_b["session"]
            a.send_text(envelope("Frame", 1, frame_payload(16, HUMAN_MIN)))
            b.send_text(envelope("Frame", 1, frame_payload(16, HUMAN_MAX)))
            cmd_a = read_until(a, "Command")
            cmd_b = read_until(b, "Command")
            assert cmd_a["session"] == hello_a["session"]
            assert cmd_b["session"] == hello_b["session"]
            assert cmd_a["payload"]["motors"]["index"] != cmd_b["payload"]["motors"]["index"]

    def test_four_concurrent_sessions(self, tmp_path):
        from contextlib import ExitStack

        client = make_client(tmp_path)
        angle_sets = [HUMAN_MIN, HUMAN_MAX, (0.0, 45.0, 50.0, 45.0), (10.0, 10.0, 10.0, 10.0)]
        with ExitStack() as stack:
            sockets = [stack.enter_context(client.websocket_connect("/session")) for _ in range(4)]
            ids = [ws.receive_json()["session"] for ws in sockets]
            assert len(set(ids)) == 4
            for i, ws in enumerate(sockets):
                ws.send_text(envelope("Frame", 1, frame_payload(16, angle_sets[i])))
            commands = [read_until(ws, "Command") for ws in sockets]
            for sid, cmd in zip(ids, commands):
                assert cmd["session"] == sid
            # distinct inputs produce distinct outputs; no cross-talk
            motor_sets = [tuple(c["payload"]["motors"]["index"]) for c in commands]
            assert len(set(motor_sets)) == 4

    def test_trial_mark_over_stream(self, tmp_path):
        client = make_client(tmp_path)
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            ws.send_text(envelope("TrialMark", 1, {"hand": "v3", "task": 17, "rep": 2, "success": True}))
            status = read_until(ws, "Status")
            assert status["payload"]["state"] == "ok"
        report = client.get("/report").json()
        row = next(r for r in report["rows"] if r["hand"] == "v3")
        assert row["successes"] == 1

    def test_live_stream_matches_offline_replay(self, tmp_path):
        # same frames, same config: the live session must emit exactly the
        # commands the offline pipeline computes
        client = make_client(tmp_path)
        angles_seq = [HUMAN_MIN, (0.0, 45.0, 50.0, 45.0), HUMAN_MAX, (10.0, 20.0, 30.0, 40.0)]
        frames = [
            GloveFrame(timestamp_ms=16 * (i + 1), per_finger={f: a for f in FINGER_ORDER})
            for i, a in enumerate(angles_seq)
        ]
        offline_state = PipelineState()
        cfg = RetargetConfig()
        from dash_teleop.hand_model import load_hand_versions

        weights = load_hand_versions()["v1"].weights
        offline = [
            command_to_dict(process_frame(fr, weights, offline_state, cfg)) for fr in frames
        ]
        live = []
        with client.websocket_connect("/session") as ws:
            ws.receive_json()
            for i, fr in enumerate(frames):
                ws.send_text(envelope("Frame", i + 1, glove_frame_to_dict(fr)))
                live.append(read_until(ws, "Command")["payload"])
        assert live == offline


class TestConfigParsing:
    def test_retarget_config_round_trip_keys(self):
        cfg = retarget_config_from_dict(
            {
                "smoothing_alpha": 1.0,
                "max_delta_per_tick": 0.1,
                "tick_ms": 8,
                "stale_timeout_ms": 500,
                "workspace_scale": 2.0,
                "workspace_box_m": [[-1, -1, 0], [1, 1, 1]],
                "human_limits": {"mcp_fwd": [0, 45]},
            }
        )
        assert cfg.smoothing_alpha == 1.0
        assert cfg.human_limits[FingerId.THUMB].mcp_fwd.raw_max_deg == 45

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigurationError):
            retarget_config_from_dict({"alpha": 0.5})

    def test_session_config_from_dict(self, tmp_path):
        cfg = SessionConfig.from_dict(
            {"hand_version": "v2", "listen_address": "0.0.0.0:9000", "trials_file": "t.jsonl"}
        )
        assert cfg.hand_version == "v2"
        assert cfg.host_port == ("0.0.0.0", 9000)

    def test_bad_listen_address(self):
        cfg = SessionConfig(listen_address="nonsense")
        with pytest.raises(ConfigurationError):
            cfg.host_port
