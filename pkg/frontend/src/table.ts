// Process data table: rows update in place from the state's render model.

import { formatValue } from "./format.js";
import type { TableRowModel } from "./state.js";

export class ProcessTable {
  private tbody: HTMLTableSectionElement;
  private onPick: (symbol: string) => void;

  constructor(root: HTMLElement, onPick: (symbol: string) => void) {
    this.onPick = onPick;
    const table = document.createElement("table");
    table.className = "process-table";
    table.innerHTML =
      "<thead><tr><th>Process Data</th><th>Actual</th><th>Setpoint</th></tr></thead>";
    this.tbody = document.createElement("tbody");
    table.appendChild(this.tbody);
    root.appendChild(table);
  }

  render(rows: TableRowModel[]): void {
    const existing = new Map<string, HTMLTableRowElement>();
    for (const tr of Array.from(this.tbody.rows)) {
      existing.set(tr.dataset.symbol ?? "", tr);
    }
    for (const row of rows) {
      let tr = existing.get(row.symbol);
      if (!tr) {
        tr = document.createElement("tr");
        tr.dataset.symbol = row.symbol;
        tr.innerHTML = "<td></td><td class='num'></td><td class='num'></td>";
        tr.addEventListener("click", () => this.onPick(row.symbol));
        this.tbody.appendChild(tr);
      }
      tr.classList.toggle("stale", row.stale);
      tr.cells[0].textContent = `${row.symbol} ${row.range}`;
      tr.cells[1].textContent = formatValue(row.actual);
      tr.cells[2].textContent = formatValue(row.setpoint);
    }
  }
}
