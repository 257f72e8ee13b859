// Alarm feed: newest first, urgent priorities visually distinct.

import { formatClock } from "./format.js";
import type { AlarmEntry } from "./state.js";

export class AlarmFeed {
  private list: HTMLUListElement;

  constructor(root: HTMLElement) {
    const box = document.createElement("div");
    box.className = "alarm-feed";
    box.innerHTML = "<h2>Alarms</h2>";
    this.list = document.createElement("ul");
    box.appendChild(this.list);
    root.appendChild(box);
  }

  render(alarms: AlarmEntry[]): void {
    this.list.replaceChildren(
      ...alarms.slice(0, 80).map((a) => {
        const li = document.createElement("li");
        li.className = a.priority <= 1 ? "urgent" : "info";
        li.textContent = `${formatClock(a.t)}  [${a.process}] p${a.priority}  ${a.text}`;
        return li;
      })
    );
  }
}
