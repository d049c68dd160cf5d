// Browser entry point: wires the telemetry socket, the command channel, the
// canvas hand, and the readout panels together. All state lives in
// ConsoleState; this file only moves it onto the screen.

import { CommandClient } from "./commands.js";
import { HandGeometry, handGeometry } from "./hand.js";
import { GESTURES, GestureName, JOINT_NAMES, PoseMessage } from "./protocol.js";
import { TelemetryClient } from "./socket.js";
import { ConnectionStatus, ConsoleState } from "./state.js";

const params = new URLSearchParams(location.search);
const host = params.get("host") ?? "127.0.0.1";
const wsUrl = params.get("ws") ?? `ws://${host}:7072/`;
const cmdUrl = params.get("cmd") ?? `ws://${host}:7073/`;

const state = new ConsoleState();

const canvas = document.getElementById("hand") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const gestureEl = document.getElementById("gesture")!;
const latencyEl = document.getElementById("latency")!;
const seqEl = document.getElementById("seq")!;
const bannerEl = document.getElementById("banner")!;
const historyEl = document.getElementById("history")!;
const jointsEl = document.getElementById("joints")!;
const tallyEl = document.getElementById("tally")!;
const driveEl = document.getElementById("drive")!;
const driveNoteEl = document.getElementById("drive-note")!;

const GESTURE_COLORS: Record<GestureName, string> = {
  rest: "#5a6b7d",
  power_grip: "#58d0a8",
  wrist_pronation: "#d0a858",
  point: "#d05876",
};

function drawHand(geometry: HandGeometry): void {
  const scale = canvas.width / 240;
  ctx.save();
  ctx.scale(scale, scale);
  ctx.fillStyle = "#0f141a";
  ctx.fillRect(0, 0, 240, 240);

  const [base, wrist] = geometry.forearm;
  ctx.strokeStyle = "#3b4c5e";
  ctx.lineWidth = 10;
  ctx.lineCap = "round";
  ctx.beginPath();
  ctx.moveTo(base.x, base.y);
  ctx.lineTo(wrist.x, wrist.y);
  ctx.stroke();

  ctx.fillStyle = "#23303d";
  ctx.strokeStyle = "#3b4c5e";
  ctx.lineWidth = 2;
  ctx.beginPath();
  geometry.palm.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.closePath();
  ctx.fill();
  ctx.stroke();

  ctx.strokeStyle = "#58d0a8";
  ctx.lineWidth = 4;
  ctx.lineJoin = "round";
  for (const chain of geometry.digits) {
    ctx.beginPath();
    chain.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
  }
  ctx.fillStyle = "#8fe6c8";
  for (const chain of geometry.digits) {
    for (const p of chain) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 2.5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  ctx.restore();
}

function renderHistory(): void {
  historyEl.innerHTML = "";
  for (const gesture of state.history) {
    const cell = document.createElement("span");
    cell.className = "hist-cell";
    cell.style.background = GESTURE_COLORS[gesture];
    cell.title = gesture;
    historyEl.appendChild(cell);
  }
}

function renderJoints(message: PoseMessage): void {
  jointsEl.innerHTML = "";
  JOINT_NAMES.forEach((name, i) => {
    const row = document.createElement("div");
    row.className = "joint-row";
    row.textContent = `${name.padEnd(20, " ")} ${message.joints[i].toFixed(3)} rad`;
    jointsEl.appendChild(row);
  });
}

function renderTally(): void {
  const table = state.tallyTable();
  let html = "<tr><th>driven \\ predicted</th>";
  for (const g of GESTURES) {
    html += `<th>${g}</th>`;
  }
  html += "</tr>";
  GESTURES.forEach((driven, i) => {
    html += `<tr><th>${driven}</th>`;
    GESTURES.forEach((_, j) => {
      const hot = i === j && table[i][j] > 0 ? ' class="diag"' : "";
      html += `<td${hot}>${table[i][j]}</td>`;
    });
    html += "</tr>";
  });
  tallyEl.innerHTML = html;
}

function renderBanner(): void {
  if (state.errorBanner === null) {
    bannerEl.textContent = "";
    bannerEl.classList.add("hidden");
  } else {
    bannerEl.textContent = `stream error: ${state.errorBanner}`;
    bannerEl.classList.remove("hidden");
  }
}

let framePending = false;

function scheduleRender(): void {
  if (framePending) {
    return;
  }
  framePending = true;
  requestAnimationFrame(() => {
    framePending = false;
    const message = state.latest;
    if (message !== null) {
      drawHand(handGeometry(message.joints));
      gestureEl.textContent = message.gesture;
      gestureEl.style.color = GESTURE_COLORS[message.gesture];
      seqEl.textContent = `seq ${message.seq}  conf ${message.confidence.toFixed(3)}`;
      const jitter = state.jitterUs();
      latencyEl.textContent = jitter === null ? "latency –" : `latency ~${(jitter / 1000).toFixed(1)} ms`;
      renderJoints(message);
      renderHistory();
      renderTally();
    }
    renderBanner();
  });
}

function showStatus(status: ConnectionStatus): void {
  state.onStatus(status);
  statusEl.textContent = status;
  statusEl.className = `pill ${status}`;
}

const telemetry = new TelemetryClient(wsUrl, {
  onLine: (line, receiveTimeUs) => {
    state.onLine(line, receiveTimeUs);
    scheduleRender();
  },
  onStatus: showStatus,
});

const commands = new CommandClient(cmdUrl);

function buildDriveButtons(): void {
  for (const gesture of GESTURES) {
    const button = document.createElement("button");
    button.textContent = gesture;
    button.onclick = async () => {
      state.setDriving(gesture);
      for (const other of Array.from(driveEl.children)) {
        other.classList.toggle("active", other === button);
      }
      try {
        await commands.driveGesture(gesture);
        driveNoteEl.textContent = `driving ${gesture}`;
      } catch (err) {
        driveNoteEl.textContent = String(err instanceof Error ? err.message : err);
      }
    };
    driveEl.appendChild(button);
  }
}

buildDriveButtons();
telemetry.connect();
commands.connect().catch(() => {
  for (const button of Array.from(driveEl.children)) {
    (button as HTMLButtonElement).disabled = true;
  }
  driveNoteEl.textContent = commands.disabledReason ?? "command channel unavailable";
});

bannerEl.onclick = () => {
  state.clearError();
  renderBanner();
};

drawHand(handGeometry(new Array(14).fill(0)));
