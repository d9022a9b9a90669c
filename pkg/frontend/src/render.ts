import type { ResolvedRow } from "./types.js";
import { undoBanner, type UiState } from "./viewmodel.js";

export interface Actions {
  advance(choice: string): void;
  undo(): void;
  verdict(kind: string, accept: boolean): void;
  alarmVerdict(alarmId: string, decision: "accept_change" | "dismiss"): void;
  dismissBanner(): void;
}

export function rangeClass(row: ResolvedRow): string {
  if (row.range === "in_range") return "in-range";
  if (row.range === "below_min" || row.range === "above_max") return "out-of-range";
  return "unknown";
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, className: string, disabled: boolean, onTap: () => void) {
  const b = el("button", className, label) as HTMLButtonElement;
  b.disabled = disabled;
  b.addEventListener("click", onTap);
  return b;
}

function vitalRow(row: ResolvedRow, busy: boolean, actions: Actions): HTMLElement {
  const li = el("li", `vital-row ${rangeClass(row)}`);
  li.appendChild(el("span", "vital-kind", row.kind));
  // a missing reading is shown as the word, never a dash or a stale number
  const valueText = row.value === null ? "unknown" : `${row.value} ${row.unit}`;
  li.appendChild(el("span", "vital-value", valueText));
  li.appendChild(
    el("span", "vital-time", row.timestamp === null ? "" : `@ ${row.timestamp} ms`),
  );
  if (row.value !== null) {
    const verdicts = el("span", "verdict-buttons");
    verdicts.appendChild(button("ok", "accept-button", busy, () => actions.verdict(row.kind, true)));
    verdicts.appendChild(
      button("no", "decline-button", busy, () => actions.verdict(row.kind, false)),
    );
    li.appendChild(verdicts);
  }
  return li;
}

export function render(root: HTMLElement, state: UiState, actions: Actions): void {
  root.textContent = "";
  const busy = state.busy;

  const header = el("header", `topbar conn-${state.connection}`);
  header.appendChild(el("span", "conn-dot"));
  header.appendChild(el("span", "conn-label", state.connection));
  root.appendChild(header);

  const view = state.view;
  if (!view) {
    root.appendChild(el("p", "placeholder", "waiting for session"));
    return;
  }

  const pending = undoBanner(state);
  if (pending) {
    const banner = el("div", "undo-banner");
    banner.appendChild(
      el(
        "span",
        "undo-text",
        `auto: ${pending.kind} ${pending.value} chose "${pending.choice}"`,
      ),
    );
    banner.appendChild(button("undo", "undo-button", busy, () => actions.undo()));
    banner.appendChild(button("×", "banner-dismiss", false, () => actions.dismissBanner()));
    root.appendChild(banner);
  }

  const breached = view.resolved.filter((r) => rangeClass(r) === "out-of-range");
  if (breached.length) {
    root.appendChild(
      el("div", "warning-banner", `out of range: ${breached.map((r) => r.kind).join(", ")}`),
    );
  }

  const step = el("section", `step step-${view.node_kind}`);
  step.appendChild(el("h1", "step-title", view.text));
  step.appendChild(el("p", "step-meta", `${view.graph_id} / ${view.node_id}`));
  root.appendChild(step);

  const rows = el("ul", "vitals");
  for (const row of view.resolved) rows.appendChild(vitalRow(row, busy, actions));
  step.appendChild(rows);

  if (view.dosage) {
    step.appendChild(
      el(
        "p",
        "dosage",
        `${view.dosage.drug}: ${view.dosage.dose} ${view.dosage.unit}`,
      ),
    );
  } else if (view.dosage_error) {
    step.appendChild(el("p", "dosage dosage-error", view.dosage_error));
  }

  const controls = el("nav", "controls");
  for (const choice of view.choices) {
    controls.appendChild(
      button(choice, "advance-button big", busy, () => actions.advance(choice)),
    );
  }
  if (view.terminal) controls.appendChild(el("span", "terminal-label", "done"));
  controls.appendChild(button("back", "undo-button footer-undo", busy, () => actions.undo()));
  root.appendChild(controls);

  if (state.error) root.appendChild(el("p", "error-line", state.error));

  const alarm = state.alarms[0];
  if (alarm) {
    const popup = el("div", "alarm-popup");
    popup.appendChild(
      el("p", "alarm-text", `${alarm.kind} ${alarm.value}: ${alarm.breach.replace("_", " ")}`),
    );
    const verdicts = el("div", "alarm-verdicts");
    if (alarm.threshold && (alarm.threshold as any).target_node) {
      verdicts.appendChild(
        button("change path", "alarm-accept big", busy, () =>
          actions.alarmVerdict(alarm.id, "accept_change"),
        ),
      );
    }
    verdicts.appendChild(
      button("dismiss", "alarm-dismiss big", busy, () =>
        actions.alarmVerdict(alarm.id, "dismiss"),
      ),
    );
    popup.appendChild(verdicts);
    root.appendChild(popup);
  }
}
