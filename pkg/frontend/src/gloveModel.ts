/**
 * Virtual glove state: sixteen sliders in human degrees, presets, and the
 * frame emission policy. Sliders are bounded by the operator's calibrated
 * ranges (delivered in the server hello); the console itself never
 * normalizes or converts angles.
 *
 * Emission policy: slider and preset changes emit within one UI tick but
 * at most once per debounce window; between changes a slower heartbeat
 * re-sends the current state, which is what a physical glove does and
 * what lets the server-side smoothing settle after a preset jump.
 */

import {
  FINGERS,
  Finger,
  FingerAngles,
  FramePayload,
  GloveAngles,
  HumanLimits,
  JOINTS,
  MonotonicClock,
} from "./protocol.js";

export const DEBOUNCE_MS = 33; // <= 30 Hz change-driven input against a 60 Hz server tick
export const HEARTBEAT_MS = 100;

export type PresetName = "open" | "pinch" | "power" | "splay";

export interface VirtualGloveState {
  angles: GloveAngles;
  activePreset: PresetName | null;
}

function centered(range: { min: number; max: number }): number {
  return (range.min + range.max) / 2;
}

/** All joints at the operator's minimums: the normalized zero pose. */
export function openAngles(limits: HumanLimits): GloveAngles {
  const out = {} as GloveAngles;
  for (const f of FINGERS) {
    out[f] = JOINTS.map((j) => limits[f][j].min) as FingerAngles;
  }
  return out;
}

export function presetAngles(name: PresetName, limits: HumanLimits): GloveAngles {
  const out = openAngles(limits);
  const curl = (f: Finger): FingerAngles => [
    centered(limits[f].mcp_side),
    limits[f].mcp_fwd.max,
    limits[f].pip.max,
    limits[f].dip.max,
  ];
  switch (name) {
    case "open":
      return out;
    case "power":
      for (const f of FINGERS) out[f] = curl(f);
      return out;
    case "pinch":
      out.thumb = curl("thumb");
      out.index = curl("index");
      return out;
    case "splay":
      for (const f of FINGERS) out[f][0] = limits[f].mcp_side.max;
      return out;
  }
}

export function clampToLimits(angles: GloveAngles, limits: HumanLimits): GloveAngles {
  const out = {} as GloveAngles;
  for (const f of FINGERS) {
    out[f] = JOINTS.map((j, i) => {
      const { min, max } = limits[f][j];
      return Math.min(max, Math.max(min, angles[f][i]));
    }) as FingerAngles;
  }
  return out;
}

export function initialState(limits: HumanLimits): VirtualGloveState {
  return { angles: openAngles(limits), activePreset: "open" };
}

/**
 * Decides when a frame goes out. Call onChange when a slider or preset
 * moves and onTimer from the UI tick; both return the payload to send,
 * or null. Timestamps come from a monotonic clock and never repeat.
 */
export class FrameScheduler {
  private lastEmitMs = -Infinity;
  private pendingChange = false;
  private readonly clock = new MonotonicClock();

  constructor(
    private readonly debounceMs: number = DEBOUNCE_MS,
    private readonly heartbeatMs: number = HEARTBEAT_MS,
  ) {}

  private emit(state: VirtualGloveState, nowMs: number): FramePayload {
    this.lastEmitMs = nowMs;
    this.pendingChange = false;
    const fingers = {} as GloveAngles;
    for (const f of FINGERS) fingers[f] = [...state.angles[f]] as FingerAngles;
    return { t: this.clock.next(nowMs), fingers };
  }

  onChange(state: VirtualGloveState, nowMs: number): FramePayload | null {
    if (nowMs - this.lastEmitMs >= this.debounceMs) return this.emit(state, nowMs);
    this.pendingChange = true;
    return null;
  }

  onTimer(state: VirtualGloveState, nowMs: number): FramePayload | null {
    if (this.pendingChange && nowMs - this.lastEmitMs >= this.debounceMs) {
      return this.emit(state, nowMs);
    }
    if (nowMs - this.lastEmitMs >= this.heartbeatMs) return this.emit(state, nowMs);
    return null;
  }
}
