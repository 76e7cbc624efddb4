// Wire schema for the session server. Field names match the JSON exactly;
// parse() is the single entry point so a malformed message fails loudly in
// one place instead of as NaN somewhere down the render path.

export interface FrameMsg {
  type: "frame";
  t: number;
  theta: number;
  omega: number;
  coherence_seed: number;
  cue: -1 | 0 | 1;
  crash_flag: boolean;
  trial_index: number;
}

export interface TrialStartMsg {
  type: "trial_start";
  trial_index: number;
  task_index: number;
  mode: "solo" | "assisted" | "observe";
  trial_seconds: number;
  coherence: number;
}

export interface TrialEndMsg {
  type: "trial_end";
  trial_index: number;
  metrics: Record<string, number>;
}

export interface SessionEndMsg {
  type: "session_end";
  summary: {
    trials: number;
    crashes: number;
    episodes: number;
    aborted: boolean;
    replay_ok: boolean | null;
  };
}

export type ServerMessage = FrameMsg | TrialStartMsg | TrialEndMsg | SessionEndMsg;

export interface JoystickMsg {
  type: "joystick";
  t_client: number;
  deflection: number;
}

export type ClientMessage = JoystickMsg | { type: "ready" } | { type: "abort" };

const MODES = new Set(["solo", "assisted", "observe"]);

function num(v: unknown, name: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`bad message: ${name} is not a finite number`);
  }
  return v;
}

export function parse(raw: string): ServerMessage {
  const m = JSON.parse(raw);
  switch (m.type) {
    case "frame": {
      num(m.t, "t");
      num(m.theta, "theta");
      num(m.omega, "omega");
      num(m.coherence_seed, "coherence_seed");
      if (m.cue !== -1 && m.cue !== 0 && m.cue !== 1) {
        throw new Error(`bad message: cue ${m.cue}`);
      }
      return m as FrameMsg;
    }
    case "trial_start":
      if (!MODES.has(m.mode)) throw new Error(`bad message: mode ${m.mode}`);
      num(m.trial_seconds, "trial_seconds");
      num(m.coherence, "coherence");
      return m as TrialStartMsg;
    case "trial_end":
    case "session_end":
      return m as ServerMessage;
    default:
      throw new Error(`bad message: unknown type ${m.type}`);
  }
}

export function joystick(deflection: number, tClient: number): string {
  return JSON.stringify({ type: "joystick", t_client: tClient, deflection });
}
