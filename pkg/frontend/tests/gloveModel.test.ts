import { describe, expect, it } from "vitest";

import {
  DEBOUNCE_MS,
  FrameScheduler,
  HEARTBEAT_MS,
  clampToLimits,
  initialState,
  openAngles,
  presetAngles,
} from "../src/gloveModel.js";
import { FINGERS, HumanLimits } from "../src/protocol.js";

const LIMITS: HumanLimits = Object.fromEntries(
  FINGERS.map((f) => [
    f,
    {
      mcp_side: { min: -30, max: 30 },
      mcp_fwd: { min: 0, max: 90 },
      pip: { min: 0, max: 100 },
      dip: { min: 0, max: 90 },
    },
  ]),
) as HumanLimits;

describe("presets", () => {
  it("open puts every joint at its human minimum", () => {
    const angles = openAngles(LIMITS);
    for (const f of FINGERS) expect(angles[f]).toEqual([-30, 0, 0, 0]);
    expect(presetAngles("open", LIMITS)).toEqual(angles);
  });

  it("power curls every finger with the splay centered", () => {
    const angles = presetAngles("power", LIMITS);
    for (const f of FINGERS) expect(angles[f]).toEqual([0, 90, 100, 90]);
  });

  it("pinch curls thumb and index only", () => {
    const angles = presetAngles("pinch", LIMITS);
    expect(angles.thumb).toEqual([0, 90, 100, 90]);
    expect(angles.index).toEqual([0, 90, 100, 90]);
    expect(angles.middle).toEqual([-30, 0, 0, 0]);
    expect(angles.ring).toEqual([-30, 0, 0, 0]);
  });

  it("splay pushes abduction to its maximum", () => {
    const angles = presetAngles("splay", LIMITS);
    for (const f of FINGERS) expect(angles[f][0]).toBe(30);
  });
});

describe("clampToLimits", () => {
  it("keeps slider values inside the configured ranges", () => {
    const state = initialState(LIMITS);
    state.angles.index = [999, -5, 50, 200];
    const clamped = clampToLimits(state.angles, LIMITS);
    expect(clamped.index).toEqual([30, 0, 50, 90]);
  });
});

describe("FrameScheduler", () => {
  it("emits exactly one frame per debounce window while sliding", () => {
    const scheduler = new FrameScheduler();
    const state = initialState(LIMITS);
    let emitted = 0;
    let now = 1000;
    // 30 slider moves 1 ms apart, with a UI timer interleaved
    for (let i = 0; i < 30; i++) {
      if (scheduler.onChange(state, now)) emitted++;
      if (scheduler.onTimer(state, now)) emitted++;
      now += 1;
    }
    // 30 ms of movement spans a single debounce window: first emit only
    expect(emitted).toBe(1);
    // trailing pending change goes out once the window elapses
    now = 1000 + DEBOUNCE_MS;
    if (scheduler.onTimer(state, now)) emitted++;
    expect(emitted).toBe(2);
  });

  it("heartbeats with the current state when idle", () => {
    const scheduler = new FrameScheduler();
    const state = initialState(LIMITS);
    expect(scheduler.onChange(state, 0)).not.toBeNull();
    expect(scheduler.onTimer(state, HEARTBEAT_MS - 1)).toBeNull();
    const beat = scheduler.onTimer(state, HEARTBEAT_MS);
    expect(beat).not.toBeNull();
    expect(beat!.fingers.thumb).toEqual(state.angles.thumb);
  });

  it("stamps strictly increasing timestamps even when the clock stalls", () => {
    const scheduler = new FrameScheduler(0, 0); // emit on every call
    const state = initialState(LIMITS);
    const t1 = scheduler.onChange(state, 500)!.t;
    const t2 = scheduler.onChange(state, 500)!.t;
    const t3 = scheduler.onChange(state, 500)!.t;
    expect(t2).toBeGreaterThan(t1);
    expect(t3).toBeGreaterThan(t2);
  });

  it("copies angles so later slider moves do not mutate sent frames", () => {
    const scheduler = new FrameScheduler(0, 0);
    const state = initialState(LIMITS);
    const frame = scheduler.onChange(state, 0)!;
    state.angles.index[1] = 45;
    expect(frame.fingers.index[1]).toBe(0);
  });
});
