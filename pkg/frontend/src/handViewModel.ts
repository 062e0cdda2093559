/**
 * Pure view-model for the live hand rendering. Every rendered pose comes
 * from server HandPose messages; the console never runs kinematics of its
 * own. The side view draws each finger's planar chain, the fan view draws
 * the splay angles, and the motor bars overlay raw vs clamped values with
 * saturation indicators.
 */

import { FINGERS, Finger, FingerPose, HandPosePayload } from "./protocol.js";

export interface CanvasPoint {
  x: number;
  y: number;
}

export interface MotorBar {
  raw: number | null;
  clamped: number | null;
  saturated: boolean;
}

/** Finger chain (mm, +x along the straight finger, flexion toward -y)
 * mapped into canvas pixels. */
export function sideViewPoints(
  pose: FingerPose,
  originX: number,
  originY: number,
  pxPerMm: number,
): CanvasPoint[] {
  return pose.points.map(([x, y]) => ({
    x: originX + x * pxPerMm,
    y: originY - y * pxPerMm,
  }));
}

/** Unit direction per finger for the top-down splay fan. Fingers sit side
 * by side; the splay angle swings each ray around straight-ahead. */
export function splayRay(finger: Finger, splayDeg: number): CanvasPoint {
  const rad = (splayDeg * Math.PI) / 180;
  return { x: Math.sin(rad), y: Math.cos(rad) };
}

export function motorBars(pose: FingerPose): MotorBar[] {
  return [0, 1, 2].map((k) => ({
    raw: pose.raw ? pose.raw[k] : null,
    clamped: pose.clamped ? pose.clamped[k] : null,
    saturated: pose.saturated ? pose.saturated[k] : false,
  }));
}

export function anySaturated(payload: HandPosePayload): boolean {
  return FINGERS.some((f) => (payload.fingers[f].saturated ?? []).some(Boolean));
}

/**
 * HOLD badge state: lit when the server reports Holding, or when the
 * stream itself has gone quiet past the stale timeout (so a dead
 * connection looks exactly like a held hand).
 */
export function holdBadge(
  serverState: string | null,
  lastPoseAgeMs: number,
  staleTimeoutMs: number,
): boolean {
  if (serverState === "holding") return true;
  return lastPoseAgeMs > staleTimeoutMs;
}

/** Scale that fits a chain of the given reach into the panel. */
export function fitScale(reachMm: number, panelPx: number, marginPx: number): number {
  return (panelPx - 2 * marginPx) / Math.max(reachMm, 1);
}
