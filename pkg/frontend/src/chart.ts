// Two-series trend chart (PV and SP) on a plain canvas, live-appending.

import type { TrendSamplePayload } from "./types.js";

export type WindowChoice = "1m" | "10m" | "all";

const WINDOW_MS: Record<WindowChoice, number | null> = {
  "1m": 60_000,
  "10m": 600_000,
  all: null,
};

/** Samples inside the selected window, measured back from the newest sample. */
export function filterWindow(
  samples: TrendSamplePayload[],
  choice: WindowChoice
): TrendSamplePayload[] {
  const span = WINDOW_MS[choice];
  if (span === null || samples.length === 0) return samples;
  const newest = samples[samples.length - 1].t;
  return samples.filter((s) => s.t >= newest - span);
}

export interface ChartScale {
  t0: number;
  t1: number;
  lo: number;
  hi: number;
}

export function computeScale(samples: TrendSamplePayload[]): ChartScale {
  const t0 = samples[0].t;
  const t1 = samples[samples.length - 1].t;
  let lo = Infinity;
  let hi = -Infinity;
  for (const s of samples) {
    lo = Math.min(lo, s.pv, s.sp);
    hi = Math.max(hi, s.pv, s.sp);
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.08;
  return { t0, t1: Math.max(t1, t0 + 1), lo: lo - pad, hi: hi + pad };
}

export class TrendChart {
  private samples: TrendSamplePayload[] = [];
  window: WindowChoice = "1m";

  constructor(private canvas: HTMLCanvasElement) {}

  setSamples(samples: TrendSamplePayload[]): void {
    this.samples = [...samples].sort((a, b) => a.t - b.t);
    this.draw();
  }

  append(sample: TrendSamplePayload): void {
    this.samples.push(sample);
    this.draw();
  }

  setWindow(choice: WindowChoice): void {
    this.window = choice;
    this.draw();
  }

  clear(): void {
    this.samples = [];
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = this.canvas;
    ctx.clearRect(0, 0, w, h);
    const visible = filterWindow(this.samples, this.window);
    if (visible.length === 0) {
      ctx.fillStyle = "#888";
      ctx.font = "13px sans-serif";
      ctx.fillText("no trend data", 12, h / 2);
      return;
    }
    const scale = computeScale(visible);
    const x = (t: number) => ((t - scale.t0) / (scale.t1 - scale.t0)) * (w - 20) + 10;
    const y = (v: number) => h - 14 - ((v - scale.lo) / (scale.hi - scale.lo)) * (h - 24);

    const series = (pick: (s: TrendSamplePayload) => number, color: string, step: boolean) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.6;
      ctx.beginPath();
      visible.forEach((s, i) => {
        const px = x(s.t);
        const py = y(pick(s));
        if (i === 0) ctx.moveTo(px, py);
        else if (step) {
          ctx.lineTo(px, y(pick(visible[i - 1])));
          ctx.lineTo(px, py);
        } else ctx.lineTo(px, py);
      });
      ctx.stroke();
    };

    series((s) => s.sp, "#e0662c", true); // setpoint: step line
    series((s) => s.pv, "#2c6ee0", false); // process value

    ctx.fillStyle = "#555";
    ctx.font = "11px sans-serif";
    ctx.fillText(scale.hi.toFixed(1), 12, 12);
    ctx.fillText(scale.lo.toFixed(1), 12, h - 4);
  }
}
