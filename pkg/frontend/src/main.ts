/**
 * Operator console: virtual glove panel driving the live session, a
 * rendered view of the simulated hand fed purely by server HandPose
 * messages, and the DASH-30 scoring board backed by the /trials endpoint.
 */

import { SessionClient, ReportBody } from "./client.js";
import {
  FrameScheduler,
  VirtualGloveState,
  clampToLimits,
  initialState,
  presetAngles,
  PresetName,
} from "./gloveModel.js";
import { fitScale, holdBadge, motorBars, sideViewPoints, splayRay } from "./handViewModel.js";
import {
  FINGERS,
  HandPosePayload,
  HumanLimits,
  JOINTS,
  StatusPayload,
  TaskInfo,
  parseHumanLimits,
} from "./protocol.js";
import { TaskBoard } from "./taskBoard.js";

const HANDS = ["v1", "v2", "v3", "v4", "v5", "allegro"];
const PRESETS: PresetName[] = ["open", "pinch", "power", "splay"];

const params = new URLSearchParams(location.search);
const baseUrl = params.get("server") ?? "http://127.0.0.1:8765";

const app = document.getElementById("app")!;
app.innerHTML = `
  <header>
    <h1>Soft-hand operator console</h1>
    <span id="conn-badge" class="badge">connecting…</span>
    <span id="hold-badge" class="badge hidden">HOLD</span>
    <span id="sat-badge" class="badge hidden">SATURATED</span>
    <span id="pending-badge" class="badge hidden"></span>
  </header>
  <div id="reconnect-banner" class="banner hidden">
    session disconnected — <button id="reconnect-btn">reconnect</button>
  </div>
  <main>
    <section id="glove-panel" class="panel">
      <h2>Virtual glove</h2>
      <div id="presets"></div>
      <div id="sliders"></div>
    </section>
    <section id="hand-panel" class="panel">
      <h2>Hand view</h2>
      <canvas id="hand-canvas" width="430" height="560"></canvas>
    </section>
    <section id="board-panel" class="panel">
      <h2>Task board</h2>
      <div>
        hand <select id="hand-select"></select>
        <button id="refresh-report">refresh report</button>
      </div>
      <div id="board"></div>
      <div id="denominator-note" class="note hidden">
        unrecorded repetitions are excluded from the loose report; strict
        mode counts them as failures
      </div>
      <h2>Report</h2>
      <div id="report"></div>
    </section>
  </main>
`;

const connBadge = document.getElementById("conn-badge")!;
const holdBadgeEl = document.getElementById("hold-badge")!;
const satBadge = document.getElementById("sat-badge")!;
const pendingBadge = document.getElementById("pending-badge")!;
const banner = document.getElementById("reconnect-banner")!;
const canvas = document.getElementById("hand-canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

let limits: HumanLimits | null = null;
let glove: VirtualGloveState | null = null;
let scheduler = new FrameScheduler();
let lastPose: HandPosePayload | null = null;
let lastPoseAt = 0;
let staleTimeoutMs = 200;
let tasks: TaskInfo[] = [];
const board = new TaskBoard();

const client = new SessionClient(baseUrl, (url) => new WebSocket(url) as never, {
  onHello: (status: StatusPayload) => {
    limits = parseHumanLimits(status);
    staleTimeoutMs = status.stale_timeout_ms ?? 200;
    glove = initialState(limits);
    scheduler = new FrameScheduler();
    connBadge.textContent = `live • ${status.hand_version} • tick ${status.tick_ms} ms`;
    banner.classList.add("hidden");
    setControlsEnabled(true);
    buildSliders();
    void restoreBoard();
  },
  onHandPose: (pose) => {
    lastPose = pose;
    lastPoseAt = performance.now();
    drawHand(pose);
  },
  onDisconnect: () => {
    connBadge.textContent = "disconnected";
    banner.classList.remove("hidden");
    setControlsEnabled(false);
    setTimeout(() => !client.connected && client.connect(), 2000);
  },
});

function setControlsEnabled(enabled: boolean): void {
  document
    .querySelectorAll<HTMLInputElement | HTMLButtonElement>("#glove-panel input, #glove-panel button")
    .forEach((el) => (el.disabled = !enabled));
}

// --- glove panel -----------------------------------------------------------

const presetsDiv = document.getElementById("presets")!;
for (const preset of PRESETS) {
  const btn = document.createElement("button");
  btn.textContent = preset;
  btn.addEventListener("click", () => {
    if (!limits || !glove) return;
    glove = { angles: presetAngles(preset, limits), activePreset: preset };
    syncSliders();
    emitChange();
  });
  presetsDiv.appendChild(btn);
}

const sliderInputs = new Map<string, HTMLInputElement>();

function buildSliders(): void {
  const host = document.getElementById("sliders")!;
  host.innerHTML = "";
  sliderInputs.clear();
  if (!limits || !glove) return;
  for (const finger of FINGERS) {
    const row = document.createElement("div");
    row.className = "finger-row";
    row.innerHTML = `<strong>${finger}</strong>`;
    JOINTS.forEach((joint, i) => {
      const { min, max } = limits![finger][joint];
      const label = document.createElement("label");
      label.textContent = joint;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(min);
      input.max = String(max);
      input.step = "0.5";
      input.value = String(glove!.angles[finger][i]);
      input.addEventListener("input", () => {
        if (!glove || !limits) return;
        glove.angles[finger][i] = Number(input.value);
        glove.angles = clampToLimits(glove.angles, limits);
        glove.activePreset = null;
        emitChange();
      });
      sliderInputs.set(`${finger}.${joint}`, input);
      label.appendChild(input);
      row.appendChild(label);
    });
    host.appendChild(row);
  }
}

function syncSliders(): void {
  if (!glove) return;
  for (const finger of FINGERS) {
    JOINTS.forEach((joint, i) => {
      const input = sliderInputs.get(`${finger}.${joint}`);
      if (input) input.value = String(glove!.angles[finger][i]);
    });
  }
}

function emitChange(): void {
  if (!glove) return;
  const payload = scheduler.onChange(glove, performance.now());
  if (payload) client.sendFrame(payload);
}

// UI tick: trailing debounce emits, heartbeat, badge refresh.
setInterval(() => {
  if (glove && client.connected) {
    const payload = scheduler.onTimer(glove, performance.now());
    if (payload) client.sendFrame(payload);
  }
  const age = performance.now() - lastPoseAt;
  const hold = lastPose !== null && holdBadge(lastPose.state, age, staleTimeoutMs * 2);
  holdBadgeEl.classList.toggle("hidden", !hold);
  pendingBadge.classList.toggle("hidden", board.pendingCount === 0);
  pendingBadge.textContent = `${board.pendingCount} marks pending`;
}, 16);

// --- hand view ---------------------------------------------------------------

function drawHand(pose: HandPosePayload): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const rowHeight = 105;
  const scale = fitScale(110, 300, 10);
  let saturatedAnywhere = false;

  FINGERS.forEach((finger, row) => {
    const fp = pose.fingers[finger];
    const originY = 30 + row * rowHeight;
    const pts = sideViewPoints(fp, 20, originY, scale);

    ctx.strokeStyle = "#2c7";
    ctx.lineWidth = 4;
    ctx.beginPath();
    pts.forEach((p, i) => (i ? ctx.lineTo(p.x, p.y) : ctx.moveTo(p.x, p.y)));
    ctx.stroke();
    ctx.fillStyle = "#9df";
    for (const p of pts) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
    ctx.fillStyle = "#ccc";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${finger}  splay ${fp.splay_deg.toFixed(0)}°`, 20, originY - 42);

    // motor bars: clamped filled, raw outline, red when saturated
    motorBars(fp).forEach((bar, k) => {
      const bx = 330;
      const by = originY - 40 + k * 14;
      ctx.strokeStyle = "#555";
      ctx.strokeRect(bx, by, 80, 9);
      if (bar.clamped !== null) {
        ctx.fillStyle = bar.saturated ? "#e55" : "#2c7";
        ctx.fillRect(bx, by, 80 * bar.clamped, 9);
        saturatedAnywhere ||= bar.saturated;
      }
      if (bar.raw !== null) {
        const clipped = Math.min(1, Math.max(0, bar.raw));
        ctx.strokeStyle = "#fa0";
        ctx.beginPath();
        ctx.moveTo(bx + 80 * clipped, by - 2);
        ctx.lineTo(bx + 80 * clipped, by + 11);
        ctx.stroke();
      }
    });
  });

  // splay fan (top-down): one ray per finger
  const fanX = 215;
  const fanY = 510;
  ctx.strokeStyle = "#79f";
  ctx.lineWidth = 2;
  FINGERS.forEach((finger, i) => {
    const dir = splayRay(finger, pose.fingers[finger].splay_deg);
    const ox = fanX + (i - 1.5) * 26;
    ctx.beginPath();
    ctx.moveTo(ox, fanY);
    ctx.lineTo(ox + dir.x * 40, fanY - dir.y * 40);
    ctx.stroke();
  });

  satBadge.classList.toggle("hidden", !saturatedAnywhere);
}

// --- task board ---------------------------------------------------------------

const handSelect = document.getElementById("hand-select") as HTMLSelectElement;
for (const hand of HANDS) {
  const option = document.createElement("option");
  option.value = option.textContent = hand;
  handSelect.appendChild(option);
}
handSelect.addEventListener("change", () => {
  board.selectedHand = handSelect.value;
  renderBoard();
});

async function restoreBoard(): Promise<void> {
  tasks = await client.getTasks();
  const { marks } = await client.getTrials();
  board.applyServer(marks);
  renderBoard();
  await refreshReport();
}

function renderBoard(): void {
  const host = document.getElementById("board")!;
  host.innerHTML = "";
  const table = document.createElement("table");
  for (const task of tasks) {
    const tr = document.createElement("tr");
    const name = document.createElement("td");
    name.textContent = `${task.id}. ${task.name}${task.compliance_flagged ? " *" : ""}`;
    tr.appendChild(name);
    for (let rep = 1; rep <= 5; rep++) {
      const td = document.createElement("td");
      const state = board.get(board.selectedHand, task.id, rep);
      td.textContent = state === undefined ? "·" : state ? "✓" : "✗";
      td.className = state === undefined ? "unset" : state ? "ok" : "fail";
      td.addEventListener("click", () => void onCellClick(task.id, rep));
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  host.appendChild(table);
  document
    .getElementById("denominator-note")!
    .classList.toggle("hidden", board.recordedCount(board.selectedHand) >= 150);
}

async function onCellClick(task: number, rep: number): Promise<void> {
  const mark = board.cycle(board.selectedHand, task, rep, Date.now());
  renderBoard();
  try {
    await client.postTrial(mark);
  } catch {
    board.enqueueRetry(mark);
  }
  await refreshReport();
}

// failed posts retry in the background until the server confirms
setInterval(() => {
  for (const mark of board.drainRetries()) {
    client.postTrial(mark).catch(() => board.enqueueRetry(mark));
  }
}, 2000);

async function refreshReport(): Promise<void> {
  let report: ReportBody;
  try {
    report = await client.getReport();
  } catch {
    return;
  }
  const host = document.getElementById("report")!;
  host.innerHTML = "";
  const table = document.createElement("table");
  table.innerHTML =
    "<tr><th>hand</th><th>success</th><th>rate%</th><th>solved</th><th>categories</th></tr>";
  for (const row of report.rows) {
    const tr = document.createElement("tr");
    const bars = Object.entries(row.categories)
      .map(([name, frac]) => `<span class="cat" title="${name}: ${(frac * 100).toFixed(0)}%">
        <i style="height:${Math.round(frac * 24)}px"></i></span>`)
      .join("");
    tr.innerHTML = `<td>${row.hand}</td><td>${row.successes}/${row.attempts}</td>
      <td>${row.rate_percent}</td><td>${row.tasks_fully_solved}/30</td><td class="cats">${bars}</td>`;
    table.appendChild(tr);
  }
  host.appendChild(table);
  for (const warning of report.warnings) {
    const p = document.createElement("p");
    p.className = "note";
    p.textContent = warning;
    host.appendChild(p);
  }
}

document.getElementById("refresh-report")!.addEventListener("click", () => void refreshReport());
document.getElementById("reconnect-btn")!.addEventListener("click", () => client.connect());

client.connect();
