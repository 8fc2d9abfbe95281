import { describe, expect, it } from "vitest";

import { barFill, chartScale, feedbackTorque, knobAngleToXY, wallEstimate } from "../src/render.js";
import { HistorySample } from "../src/state.js";

describe("knob geometry", () => {
  it("theta 0 points straight up", () => {
    const { x, y } = knobAngleToXY(0, 100);
    expect(x).toBeCloseTo(0);
    expect(y).toBeCloseTo(-100);
  });

  it("positive deflection swings right", () => {
    expect(knobAngleToXY(0.3, 100).x).toBeGreaterThan(0);
  });
});

describe("torque bar", () => {
  it("is linear and clamps at the limit marks", () => {
    expect(barFill(0.22, 0.44)).toBeCloseTo(0.5);
    expect(barFill(0.44, 0.44)).toBe(1);
    expect(barFill(-1.0, 0.44)).toBe(-1);
  });

  it("pins at the ceiling when the force clamp engages", () => {
    // gain * f_max = 0.022 * 20 = the 0.44 actuator limit
    const tau = feedbackTorque(35.0, 0.022, 20.0);
    expect(Math.abs(tau)).toBeCloseTo(0.44, 10);
    expect(Math.abs(barFill(tau, 0.44))).toBeCloseTo(1, 6);
  });

  it("maps force to torque with the bridge sign", () => {
    expect(feedbackTorque(10, 0.022, 20)).toBeCloseTo(-0.22);
    expect(feedbackTorque(0, 0.022, 20)).toBe(-0);
  });
});

describe("chart helpers", () => {
  it("scales values into the padded band, top-down", () => {
    const s = chartScale([0, 1], 100, 10);
    expect(s.toY(1)).toBe(10);
    expect(s.toY(0)).toBe(90);
    expect(s.toY(0.5)).toBe(50);
  });

  it("survives flat data", () => {
    const s = chartScale([0.2, 0.2, 0.2], 100);
    expect(Number.isFinite(s.toY(0.2))).toBe(true);
  });

  it("estimates the wall face from contact samples only", () => {
    const rows: HistorySample[] = [
      { t: 0, p: 0.1, p_ref: 0.1, v_ref: 0, f_contact: 0 },
      { t: 1, p: 0.25, p_ref: 0.3, v_ref: 0, f_contact: 12 },
      { t: 2, p: 0.21, p_ref: 0.3, v_ref: 0, f_contact: 4 },
    ];
    expect(wallEstimate(rows)).toBe(0.21);
    expect(wallEstimate(rows.slice(0, 1))).toBeNull();
  });
});
