// Setpoint entry form. The displayed SP is never touched from here: the
// table follows server data events only, so a rejected value cannot leak in.

import { GatewayApi } from "./api.js";
import { parseSetpointInput, rangeText } from "./format.js";
import type { RowState } from "./state.js";

export class SetpointForm {
  private input: HTMLInputElement;
  private button: HTMLButtonElement;
  private label: HTMLSpanElement;
  private toast: HTMLDivElement;
  private current: { process: string; row: RowState } | null = null;

  constructor(root: HTMLElement, private api: GatewayApi) {
    const form = document.createElement("form");
    form.className = "setpoint-form";
    this.label = document.createElement("span");
    this.label.textContent = "select a variable";
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "new setpoint";
    this.button = document.createElement("button");
    this.button.type = "submit";
    this.button.textContent = "Send";
    this.toast = document.createElement("div");
    this.toast.className = "toast";
    form.append(this.label, this.input, this.button, this.toast);
    root.appendChild(form);

    this.input.addEventListener("input", () => this.refresh());
    form.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.submit();
    });
    this.refresh();
  }

  target(process: string, row: RowState): void {
    this.current = { process, row };
    this.label.textContent = `${row.symbol} ${rangeText(row.lowLimit, row.highLimit)}`;
    this.refresh();
  }

  private parsed(): number | null {
    return parseSetpointInput(this.input.value);
  }

  private refresh(): void {
    const blank = this.input.value.trim() === "";
    const valid = this.parsed() !== null;
    this.button.disabled = blank || !valid || this.current === null;
    if (!blank && !valid && this.current) {
      const { row } = this.current;
      this.show(`not a number; range ${rangeText(row.lowLimit, row.highLimit)}`, "rejected");
    }
  }

  private async submit(): Promise<void> {
    const value = this.parsed();
    if (value === null || this.current === null) return;
    const { process, row } = this.current;
    this.button.disabled = true;
    try {
      const result = await this.api.submitSetpoint(process, row.symbol, value);
      const text = result.alarmText ?? result.reason ?? result.outcome;
      this.show(`${result.outcome}: ${text}`, result.outcome);
    } catch (err) {
      this.show(`request failed: ${String(err)}`, "error");
    } finally {
      this.button.disabled = false;
      this.refresh();
    }
  }

  private show(text: string, kind: string): void {
    this.toast.textContent = text;
    this.toast.dataset.kind = kind;
  }
}
