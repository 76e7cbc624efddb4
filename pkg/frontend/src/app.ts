import { FrameMsg, ServerMessage, joystick, parse } from "./protocol.js";
import { DEFAULT_RDK, RdkField } from "./rdk.js";
import { InputAxis, deadZone } from "./input.js";

// Single-page client. The server owns the physics; this file only renders
// the latest frame and streams the stick back. One frame buffer slot,
// latest wins -- if we render slower than 60 Hz we skip, never queue.

const canvas = document.getElementById("rdk") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const cueLeft = document.getElementById("cue-left")!;
const cueRight = document.getElementById("cue-right")!;
const readyBtn = document.getElementById("ready") as HTMLButtonElement;
const inputNote = document.getElementById("input-note")!;

const params = new URLSearchParams(location.search);
const wsUrl = params.get("server") ?? `ws://${location.hostname}:8765`;

let field: RdkField | null = null;
let slot: FrameMsg | null = null; // latest unrendered frame
let prevTheta: number | null = null;
let cue: -1 | 0 | 1 = 0;
let crashFlash = 0;

const axis = new InputAxis(performance.now());
let usingGamepad = false;

const ws = new WebSocket(wsUrl);

ws.onopen = () => {
  banner.textContent = "connected - press ready";
  readyBtn.disabled = false;
};

ws.onclose = () => {
  banner.textContent = "connection closed";
  readyBtn.disabled = true;
};

ws.onmessage = (ev) => {
  let msg: ServerMessage;
  try {
    msg = parse(ev.data as string);
  } catch (err) {
    console.error(err);
    return;
  }
  switch (msg.type) {
    case "frame":
      slot = msg;
      break;
    case "trial_start":
      field = new RdkField({ ...DEFAULT_RDK, coherence: msg.coherence }, 1);
      prevTheta = null;
      banner.textContent = `trial ${msg.trial_index + 1} - ${msg.mode} - ${msg.trial_seconds}s`;
      break;
    case "trial_end": {
      const m = msg.metrics;
      banner.textContent = `trial ${msg.trial_index + 1} done - crashes ${m.crashes ?? "?"}`;
      break;
    }
    case "session_end":
      banner.textContent = `session complete - ${msg.summary.trials} trials, ${msg.summary.crashes} crashes`;
      cue = 0;
      break;
  }
};

readyBtn.onclick = () => {
  ws.send(JSON.stringify({ type: "ready" }));
  readyBtn.disabled = true;
  banner.textContent = "starting...";
};

window.addEventListener("keydown", (e) => {
  if (e.repeat) return;
  if (e.key === "ArrowLeft") axis.keyDown(-1, performance.now());
  if (e.key === "ArrowRight") axis.keyDown(1, performance.now());
});
window.addEventListener("keyup", (e) => {
  if (e.key === "ArrowLeft") axis.keyUp(-1, performance.now());
  if (e.key === "ArrowRight") axis.keyUp(1, performance.now());
});

function readStick(): number {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  for (const pad of pads) {
    if (pad && pad.connected) {
      if (!usingGamepad) {
        usingGamepad = true;
        inputNote.textContent = `gamepad: ${pad.id}`;
      }
      return deadZone(pad.axes[0] ?? 0);
    }
  }
  if (usingGamepad) {
    usingGamepad = false;
    inputNote.textContent = "keyboard (arrow keys)";
  }
  return axis.read(performance.now());
}

// stick samples go out on their own cadence, decoupled from rendering
setInterval(() => {
  if (ws.readyState === WebSocket.OPEN) {
    ws.send(joystick(readStick(), performance.now() / 1000));
  }
}, 1000 / 60);

function draw(): void {
  requestAnimationFrame(draw);
  const frame = slot;
  if (frame) {
    slot = null;
    cue = frame.cue;
    if (frame.crash_flag) crashFlash = 12;
    if (field) {
      const delta = prevTheta === null ? 0 : ((frame.theta - prevTheta) * Math.PI) / 180;
      prevTheta = frame.theta;
      field.step(delta, frame.coherence_seed);
    }
  }

  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = crashFlash > 0 ? "#401010" : "#111";
  if (crashFlash > 0) crashFlash--;
  ctx.fillRect(0, 0, w, h);
  if (field) {
    ctx.fillStyle = "#e8e8e8";
    const { radius, dotSize } = field.cfg;
    for (const a of field.angles) {
      ctx.beginPath();
      ctx.arc(w / 2 + radius * Math.cos(a), h / 2 + radius * Math.sin(a), dotSize, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  cueLeft.style.visibility = cue === -1 ? "visible" : "hidden";
  cueRight.style.visibility = cue === 1 ? "visible" : "hidden";
}

inputNote.textContent = "keyboard (arrow keys)";
requestAnimationFrame(draw);
