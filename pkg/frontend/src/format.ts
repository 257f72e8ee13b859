// Number and text formatting for the operator table.

/** Engineering-unit rendering: integral values keep one decimal (0 -> "0.0"). */
export function formatValue(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  return Number.isInteger(x) ? x.toFixed(1) : String(x);
}

/** Range column text, exactly `(low-->high)`. */
export function rangeText(low: number, high: number): string {
  return `(${formatValue(low)}-->${formatValue(high)})`;
}

export function formatClock(t: number): string {
  const d = new Date(t);
  const pad = (n: number) => String(n).padStart(2, "0");
  return `${pad(d.getUTCHours())}:${pad(d.getUTCMinutes())}:${pad(d.getUTCSeconds())}`;
}

/** Numeric form input: null for blank or non-numeric text. */
export function parseSetpointInput(text: string): number | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  return Number.isFinite(value) ? value : null;
}
