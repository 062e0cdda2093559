/**
 * Session client: one stream connection per tab plus the request
 * endpoints. Takes a WebSocket constructor so tests can supply a Node
 * implementation; the browser passes the native one.
 */

import {
  CommandPayload,
  Envelope,
  FramePayload,
  HandPosePayload,
  MessageEncoder,
  StatusPayload,
  TaskInfo,
  TrialMark,
  parseEnvelope,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionHandlers {
  onHello?: (status: StatusPayload, session: string) => void;
  onStatus?: (status: StatusPayload) => void;
  onCommand?: (command: CommandPayload) => void;
  onHandPose?: (pose: HandPosePayload) => void;
  onDisconnect?: () => void;
}

export class SessionClient {
  private socket: SocketLike | null = null;
  private encoder: MessageEncoder | null = null;
  private sessionId: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly makeSocket: SocketFactory,
    private readonly handlers: SessionHandlers,
  ) {}

  get connected(): boolean {
    return this.encoder !== null;
  }

  get session(): string | null {
    return this.sessionId;
  }

  connect(): void {
    const wsUrl = this.baseUrl.replace(/^http/, "ws") + "/session";
    const socket = this.makeSocket(wsUrl);
    this.socket = socket;
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onclose = () => this.handleClose();
    socket.onerror = () => socket.close();
  }

  disconnect(): void {
    this.socket?.close();
  }

  private handleClose(): void {
    this.socket = null;
    this.encoder = null;
    this.sessionId = null;
    this.handlers.onDisconnect?.();
  }

  private handleMessage(text: string): void {
    let envelope: Envelope;
    try {
      envelope = parseEnvelope(text);
    } catch {
      return; // not a session message; ignore
    }
    if (envelope.kind === "Status") {
      const status = envelope.payload as StatusPayload;
      if (this.encoder === null) {
        // first Status is the hello: adopt the session id
        this.sessionId = envelope.session;
        this.encoder = new MessageEncoder(envelope.session);
        this.handlers.onHello?.(status, envelope.session);
      } else {
        this.handlers.onStatus?.(status);
      }
      return;
    }
    if (envelope.kind === "Command") this.handlers.onCommand?.(envelope.payload as CommandPayload);
    if (envelope.kind === "HandPose") this.handlers.onHandPose?.(envelope.payload as HandPosePayload);
  }

  sendFrame(payload: FramePayload): boolean {
    if (!this.socket || !this.encoder) return false;
    this.socket.send(this.encoder.frame(payload));
    return true;
  }

  // --- request endpoints ---------------------------------------------------

  async getTasks(): Promise<TaskInfo[]> {
    const res = await fetch(`${this.baseUrl}/tasks`);
    if (!res.ok) throw new Error(`GET /tasks -> ${res.status}`);
    return (await res.json()) as TaskInfo[];
  }

  async getReport(strict = false): Promise<ReportBody> {
    const res = await fetch(`${this.baseUrl}/report?strict=${strict}`);
    if (!res.ok) throw new Error(`GET /report -> ${res.status}`);
    return (await res.json()) as ReportBody;
  }

  async getTrials(): Promise<{ marks: StoredMark[] }> {
    const res = await fetch(`${this.baseUrl}/trials`);
    if (!res.ok) throw new Error(`GET /trials -> ${res.status}`);
    return (await res.json()) as { marks: StoredMark[] };
  }

  async postTrial(mark: TrialMark): Promise<void> {
    const res = await fetch(`${this.baseUrl}/trials`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(mark),
    });
    if (!res.ok) throw new Error(`POST /trials -> ${res.status}`);
  }
}

export interface ReportRow {
  hand: string;
  successes: number;
  attempts: number;
  rate_percent: number;
  tasks_fully_solved: number;
  categories: Record<string, number>;
}

export interface ReportBody {
  strict: boolean;
  rows: ReportRow[];
  warnings: string[];
}

export interface StoredMark {
  hand: string;
  task: number;
  rep: number;
  success: boolean;
  t: number;
  notes: string;
}
