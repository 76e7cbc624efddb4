import { describe, expect, it } from "vitest";
import { joystick, parse } from "../src/protocol";

describe("parse", () => {
  it("round-trips a frame", () => {
    const frame = {
      type: "frame", t: 0.25, theta: -3.5, omega: 12.0,
      coherence_seed: 123456, cue: -1, crash_flag: false, trial_index: 2,
    };
    const got = parse(JSON.stringify(frame));
    expect(got).toEqual(frame);
  });

  it("accepts the three control messages", () => {
    expect(parse('{"type":"trial_start","trial_index":0,"task_index":0,"mode":"solo","trial_seconds":30,"coherence":0.5}').type).toBe("trial_start");
    expect(parse('{"type":"trial_end","trial_index":0,"metrics":{"crashes":1}}').type).toBe("trial_end");
    expect(parse('{"type":"session_end","summary":{"trials":3,"crashes":4,"episodes":0,"aborted":false,"replay_ok":true}}').type).toBe("session_end");
  });

  it("rejects garbage where it would corrupt rendering", () => {
    expect(() => parse('{"type":"frame","t":0,"theta":"oops","omega":0,"coherence_seed":1,"cue":0,"crash_flag":false,"trial_index":0}')).toThrow(/theta/);
    expect(() => parse('{"type":"frame","t":0,"theta":0,"omega":0,"coherence_seed":1,"cue":2,"crash_flag":false,"trial_index":0}')).toThrow(/cue/);
    expect(() => parse('{"type":"trial_start","trial_index":0,"task_index":0,"mode":"fly","trial_seconds":30,"coherence":0.5}')).toThrow(/mode/);
    expect(() => parse('{"type":"nonsense"}')).toThrow(/unknown type/);
  });

  it("serializes joystick samples with the wire field names", () => {
    expect(JSON.parse(joystick(-0.25, 1.5))).toEqual({
      type: "joystick", t_client: 1.5, deflection: -0.25,
    });
  });
});
