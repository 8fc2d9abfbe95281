import { describe, expect, it } from "vitest";

import { parseBusMessage, paramsMessage, torqueMessage } from "../src/schema.js";
import { busLine } from "./helpers.js";

describe("parseBusMessage", () => {
  it("accepts each published topic", () => {
    const cases: [string, Record<string, unknown>][] = [
      ["joystick/state", { theta: 0.1, omega: -0.2, tau_operator: -0.05 }],
      ["robot/ref", { v_ref: 0.05, p_ref: 0.4 }],
      ["robot/state", { p: 0.39, v: 0.01, f_contact: 0 }],
      ["bridge/diag", { frames_rx: 100, overruns: 0 }],
    ];
    for (const [topic, body] of cases) {
      const msg = parseBusMessage(busLine(topic, 1.5, body));
      expect(msg).not.toBeNull();
      expect(msg!.topic).toBe(topic);
      expect(msg!.t).toBe(1.5);
      expect(msg!.body).toEqual(body);
    }
  });

  it("rejects junk without throwing", () => {
    const bad = [
      "not json at all",
      "42",
      "[1,2,3]",
      "{}",
      '{"topic":"joystick/state","t":0}',
      '{"topic":"joystick/state","t":"zero","body":{}}',
      '{"topic":5,"t":0,"body":{}}',
      '{"topic":"joystick/state","t":0,"body":{"theta":0.1,"omega":0.2}}',
      '{"topic":"joystick/state","t":0,"body":{"theta":1e999,"omega":0,"tau_operator":0}}',
      '{"topic":"robot/state","t":0,"body":{"p":"far","v":0,"f_contact":0}}',
    ];
    for (const line of bad) expect(parseBusMessage(line), line).toBeNull();
  });

  it("passes unknown topics through for forward compatibility", () => {
    const msg = parseBusMessage(busLine("future/topic", 0, { anything: 1 }));
    expect(msg).not.toBeNull();
  });
});

describe("outbound builders", () => {
  it("torque rides at the top level", () => {
    expect(JSON.parse(torqueMessage(0.3))).toEqual({ topic: "operator/torque", tau: 0.3 });
  });

  it("params spread next to the topic", () => {
    expect(JSON.parse(paramsMessage({ v_max: 4 }))).toEqual({ topic: "operator/params", v_max: 4 });
  });
});
