/**
 * Wire schema of the session service. Every stream message is a JSON
 * envelope {kind, session, seq, payload}; sequence numbers increase
 * monotonically per direction, and frame timestamps are never reused.
 */

export const FINGERS = ["thumb", "index", "middle", "ring"] as const;
export type Finger = (typeof FINGERS)[number];

export const JOINTS = ["mcp_side", "mcp_fwd", "pip", "dip"] as const;
export type Joint = (typeof JOINTS)[number];

export type Kind = "Frame" | "Command" | "HandPose" | "TrialMark" | "Status";

export interface Envelope<P = unknown> {
  kind: Kind;
  session: string;
  seq: number;
  payload: P;
}

/** Four raw angles (degrees) per finger, in joint order. */
export type FingerAngles = [number, number, number, number];
export type GloveAngles = Record<Finger, FingerAngles>;

export interface FramePayload {
  t: number;
  fingers: GloveAngles;
}

export interface CommandPayload {
  t: number;
  motors: Record<Finger, [number, number, number]>;
}

export interface FingerPose {
  points: [number, number][];
  splay_deg: number;
  raw: [number, number, number] | null;
  clamped: [number, number, number] | null;
  saturated: [boolean, boolean, boolean] | null;
}

export interface HandPosePayload {
  t: number;
  state: string;
  fingers: Record<Finger, FingerPose>;
}

export interface StatusPayload {
  state: string;
  detail?: string;
  hand_version?: string;
  tick_ms?: number;
  stale_timeout_ms?: number;
  max_delta_per_tick?: number;
  human_limits?: Record<string, Record<string, [number, number]>>;
  [key: string]: unknown;
}

export interface TrialMark {
  hand: string;
  task: number;
  rep: number;
  success: boolean | null;
  t: number;
  notes: string;
}

export interface TaskInfo {
  id: number;
  name: string;
  category: string;
  compliance_flagged: boolean;
}

export interface JointRange {
  min: number;
  max: number;
}
export type FingerLimits = Record<Joint, JointRange>;
export type HumanLimits = Record<Finger, FingerLimits>;

export function parseEnvelope(text: string): Envelope {
  const raw = JSON.parse(text);
  if (typeof raw !== "object" || raw === null) throw new Error("envelope must be an object");
  const { kind, session, seq, payload } = raw as Record<string, unknown>;
  if (typeof kind !== "string" || typeof seq !== "number" || typeof session !== "string") {
    throw new Error("envelope missing kind/session/seq");
  }
  return { kind: kind as Kind, session, seq, payload };
}

/** Human joint ranges from the server's hello Status. */
export function parseHumanLimits(status: StatusPayload): HumanLimits {
  const src = status.human_limits;
  if (!src) throw new Error("hello carries no human_limits");
  const out = {} as HumanLimits;
  for (const finger of FINGERS) {
    const fingerSrc = src[finger];
    if (!fingerSrc) throw new Error(`human_limits missing ${finger}`);
    const limits = {} as FingerLimits;
    for (const joint of JOINTS) {
      const pair = fingerSrc[joint];
      if (!pair || pair.length !== 2) throw new Error(`human_limits missing ${finger}.${joint}`);
      limits[joint] = { min: pair[0], max: pair[1] };
    }
    out[finger] = limits;
  }
  return out;
}

/** Strictly increasing milliseconds; a wall-clock tie never reuses a value. */
export class MonotonicClock {
  private last = -1;

  next(wallMs: number): number {
    const t = Math.max(Math.floor(wallMs), this.last + 1);
    this.last = t;
    return t;
  }
}

/** Builds outgoing envelopes with an increasing per-session sequence. */
export class MessageEncoder {
  private seq = 0;

  constructor(private readonly session: string) {}

  private envelope(kind: Kind, payload: unknown): string {
    this.seq += 1;
    return JSON.stringify({ kind, session: this.session, seq: this.seq, payload });
  }

  frame(payload: FramePayload): string {
    return this.envelope("Frame", payload);
  }

  trialMark(mark: TrialMark): string {
    return this.envelope("TrialMark", mark);
  }
}
