import { describe, expect, it } from "vitest";

import { computeScale, filterWindow } from "../src/chart.js";
import type { TrendSamplePayload } from "../src/types.js";

function samples(): TrendSamplePayload[] {
  const out: TrendSamplePayload[] = [];
  for (let i = 0; i < 200; i++) {
    out.push({ t: i * 5000, pv: Math.sin(i / 10) * 50 + 100, sp: 100 });
  }
  return out;
}

describe("filterWindow", () => {
  it("equals a brute-force filter for the same bounds", () => {
    const all = samples();
    const newest = all[all.length - 1].t;
    expect(filterWindow(all, "1m")).toEqual(all.filter((s) => s.t >= newest - 60_000));
    expect(filterWindow(all, "10m")).toEqual(all.filter((s) => s.t >= newest - 600_000));
  });

  it("returns everything for the all window", () => {
    const all = samples();
    expect(filterWindow(all, "all")).toEqual(all);
  });

  it("handles empty input", () => {
    expect(filterWindow([], "1m")).toEqual([]);
  });
});

describe("computeScale", () => {
  it("covers every plotted value", () => {
    const all = samples();
    const scale = computeScale(all);
    for (const s of all) {
      expect(s.pv).toBeGreaterThanOrEqual(scale.lo);
      expect(s.pv).toBeLessThanOrEqual(scale.hi);
      expect(s.sp).toBeGreaterThanOrEqual(scale.lo);
      expect(s.sp).toBeLessThanOrEqual(scale.hi);
    }
    expect(scale.t0).toBe(all[0].t);
    expect(scale.t1).toBe(all[all.length - 1].t);
  });

  it("does not collapse when all values are equal", () => {
    const flat = [{ t: 0, pv: 5, sp: 5 }, { t: 10, pv: 5, sp: 5 }];
    const scale = computeScale(flat);
    expect(scale.hi).toBeGreaterThan(scale.lo);
  });
});
