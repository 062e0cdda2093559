/**
 * DASH-30 scoring board state. Each (hand, task, repetition) is unset or
 * exactly one of success/fail; clicking cycles unset -> success -> fail ->
 * unset. Marks post to the /trials endpoint optimistically; failed posts
 * queue for retry with a visible pending count. The server is
 * authoritative: applyServer() replaces local state wholesale, which is
 * also how a reload restores the board.
 */

import { TrialMark } from "./protocol.js";

export type MarkState = boolean | undefined; // undefined = unset

function key(hand: string, task: number, rep: number): string {
  return `${hand}:${task}:${rep}`;
}

export class TaskBoard {
  selectedHand = "v1";
  private marks = new Map<string, boolean>();
  private retryQueue: TrialMark[] = [];

  get(hand: string, task: number, rep: number): MarkState {
    return this.marks.get(key(hand, task, rep));
  }

  /** Cycle the repetition state; returns the mark to post (null success = unmark). */
  cycle(hand: string, task: number, rep: number, nowMs: number): TrialMark {
    const current = this.get(hand, task, rep);
    const next: boolean | null = current === undefined ? true : current ? false : null;
    if (next === null) this.marks.delete(key(hand, task, rep));
    else this.marks.set(key(hand, task, rep), next);
    return { hand, task, rep, success: next, t: Math.floor(nowMs), notes: "" };
  }

  /** Server state wins; local optimistic marks are discarded. */
  applyServer(marks: { hand: string; task: number; rep: number; success: boolean }[]): void {
    this.marks.clear();
    for (const m of marks) this.marks.set(key(m.hand, m.task, m.rep), m.success);
  }

  snapshot(): { hand: string; task: number; rep: number; success: boolean }[] {
    return [...this.marks.entries()]
      .map(([k, success]) => {
        const [hand, task, rep] = k.split(":");
        return { hand, task: Number(task), rep: Number(rep), success };
      })
      .sort((a, b) =>
        a.hand === b.hand ? a.task - b.task || a.rep - b.rep : a.hand < b.hand ? -1 : 1,
      );
  }

  /** Tasks where all five repetitions are marked successful. */
  fullySolved(hand: string): number {
    let solved = 0;
    for (let task = 1; task <= 30; task++) {
      let all = true;
      for (let rep = 1; rep <= 5; rep++) {
        if (this.get(hand, task, rep) !== true) {
          all = false;
          break;
        }
      }
      if (all) solved += 1;
    }
    return solved;
  }

  /** Repetitions recorded for a hand; fewer than 150 means the loose-mode
   * report excludes the gap from its denominator. */
  recordedCount(hand: string): number {
    let n = 0;
    for (const k of this.marks.keys()) if (k.startsWith(`${hand}:`)) n += 1;
    return n;
  }

  // --- retry queue -------------------------------------------------------

  enqueueRetry(mark: TrialMark): void {
    this.retryQueue.push(mark);
  }

  get pendingCount(): number {
    return this.retryQueue.length;
  }

  drainRetries(): TrialMark[] {
    const out = this.retryQueue;
    this.retryQueue = [];
    return out;
  }
}
