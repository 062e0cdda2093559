import { describe, expect, it } from "vitest";

import {
  MessageEncoder,
  MonotonicClock,
  parseEnvelope,
  parseHumanLimits,
  StatusPayload,
} from "../src/protocol.js";

describe("parseEnvelope", () => {
  it("accepts a well-formed envelope", () => {
    const env = parseEnvelope(
      JSON.stringify({ kind: "Status", session: "abc", seq: 1, payload: { state: "live" } }),
    );
    expect(env.kind).toBe("Status");
    expect(env.session).toBe("abc");
    expect(env.seq).toBe(1);
  });

  it("rejects envelopes without kind/session/seq", () => {
    expect(() => parseEnvelope(JSON.stringify({ payload: {} }))).toThrow();
    expect(() => parseEnvelope(JSON.stringify({ kind: "Status", seq: 1, payload: {} }))).toThrow();
  });
});

describe("MonotonicClock", () => {
  it("never reuses a timestamp even when the wall clock stalls", () => {
    const clock = new MonotonicClock();
    const a = clock.next(100);
    const b = clock.next(100);
    const c = clock.next(99);
    expect(a).toBe(100);
    expect(b).toBe(101);
    expect(c).toBe(102);
  });

  it("follows the wall clock when it advances", () => {
    const clock = new MonotonicClock();
    expect(clock.next(50)).toBe(50);
    expect(clock.next(200)).toBe(200);
  });
});

describe("MessageEncoder", () => {
  it("stamps increasing sequence numbers and the session id", () => {
    const enc = new MessageEncoder("sess-1");
    const first = JSON.parse(enc.frame({ t: 1, fingers: {} as never }));
    const second = JSON.parse(enc.frame({ t: 2, fingers: {} as never }));
    expect(first.seq).toBe(1);
    expect(second.seq).toBe(2);
    expect(first.session).toBe("sess-1");
    expect(first.kind).toBe("Frame");
  });
});

describe("parseHumanLimits", () => {
  const hello: StatusPayload = {
    state: "live",
    human_limits: Object.fromEntries(
      ["thumb", "index", "middle", "ring"].map((f) => [
        f,
        { mcp_side: [-30, 30], mcp_fwd: [0, 90], pip: [0, 100], dip: [0, 90] },
      ]),
    ) as never,
  };

  it("extracts per-finger joint ranges", () => {
    const limits = parseHumanLimits(hello);
    expect(limits.index.mcp_fwd).toEqual({ min: 0, max: 90 });
    expect(limits.ring.pip.max).toBe(100);
  });

  it("rejects incomplete hellos", () => {
    expect(() => parseHumanLimits({ state: "live" })).toThrow();
  });
});
