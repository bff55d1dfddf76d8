import type {
  ContractDoc,
  EventDoc,
  GraphDoc,
  IndexedEvent,
  RunRecord,
  SafetyAnnotation,
  StateDoc,
} from "./types.js";
import type { BlockedBanner } from "./model.js";

// All builders take a container and replace its children. Text goes in via
// textContent only; nothing from the wire is ever interpreted as markup.

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function clear(container: HTMLElement): void {
  container.replaceChildren();
}

export function fmtNumber(value: number): string {
  if (Number.isInteger(value)) return String(value);
  const rounded = Number(value.toPrecision(10));
  return String(rounded);
}

function fmtValue(value: unknown): string {
  if (typeof value === "number") return fmtNumber(value);
  if (value === null || value === undefined) return "";
  if (typeof value === "object") return JSON.stringify(value);
  return String(value);
}

function unitFor(field: string): string {
  if (field.endsWith("_dbm")) return "dBm";
  if (field.endsWith("_hz")) return "Hz";
  return "";
}

export function clampText(note: SafetyAnnotation): string {
  const unit = note.field ? unitFor(note.field) : "";
  const base = `clamped ${fmtValue(note.requested)} → ${fmtValue(note.applied)}`;
  return unit ? `${base} ${unit}` : base;
}

export function kindBadge(kind: string): HTMLElement {
  return el("span", `kind-badge kind-${kind}`, kind);
}

// ---------------------------------------------------------------- runs list

export function renderRunsList(
  container: HTMLElement,
  records: RunRecord[],
  selectedId: string | null,
  onSelect: (runId: string) => void,
): void {
  clear(container);
  if (records.length === 0) {
    container.appendChild(el("div", "notice-empty", "no runs yet"));
    return;
  }
  for (const record of records) {
    const row = el("div", "run-row");
    row.dataset["runId"] = record.run_id;
    if (record.run_id === selectedId) row.classList.add("selected");
    row.appendChild(
      el("span", `outcome-badge outcome-${record.outcome.toLowerCase()}`, record.outcome),
    );
    row.appendChild(el("span", "run-utterance", record.utterance));
    if (record.route_label) {
      row.appendChild(el("span", "run-route", record.route_label));
    }
    row.addEventListener("click", () => onSelect(record.run_id));
    container.appendChild(row);
  }
}

// ------------------------------------------------------------ contract pane

export function renderContractPane(
  container: HTMLElement,
  record: RunRecord | undefined,
  contract: ContractDoc | null,
): void {
  clear(container);
  if (record?.error) {
    const row = el("div", "error-row");
    row.appendChild(el("span", "error-stage", record.stage_failed ?? "error"));
    row.appendChild(el("span", "error-text", record.error));
    container.appendChild(row);
    return;
  }
  if (!contract) {
    container.appendChild(el("div", "notice-empty", "no contract"));
    return;
  }
  const head = el("div", "contract-head");
  head.appendChild(el("span", "contract-class", contract.task_class));
  head.appendChild(el("span", "contract-provenance", contract.provenance));
  container.appendChild(head);

  const params = el("table", "contract-params");
  for (const [name, value] of Object.entries(contract.parameters)) {
    const tr = el("tr");
    tr.appendChild(el("td", "param-name", name));
    tr.appendChild(el("td", "param-value", fmtValue(value)));
    params.appendChild(tr);
  }
  container.appendChild(params);

  if (contract.safety_flags.length > 0) {
    const flags = el("div", "contract-flags");
    for (const flag of contract.safety_flags) {
      flags.appendChild(el("span", "safety-flag", `${flag.kind}: ${flag.detail}`));
    }
    container.appendChild(flags);
  }
  if (contract.missing_fields.length > 0) {
    container.appendChild(
      el("div", "contract-missing", `missing: ${contract.missing_fields.join(", ")}`),
    );
  }
}

// --------------------------------------------------------------- graph pane

function nodeRow(
  node: GraphDoc["nodes"][number],
  annotations: SafetyAnnotation[],
): HTMLElement {
  const row = el("div", "graph-node");
  row.dataset["nodeId"] = node.id;
  row.appendChild(kindBadge(node.kind));
  row.appendChild(el("span", "node-id", node.id));
  if (node.resource && node.resource !== node.id) {
    row.appendChild(el("span", "node-resource", node.resource));
  }
  const bind = Object.entries(node.bind)
    .map(([param, spec]) => {
      const value =
        spec !== null && typeof spec === "object" && "value" in (spec as object)
          ? (spec as { value: unknown }).value
          : spec;
      return `${param}=${fmtValue(value)}`;
    })
    .join(" ");
  if (bind) row.appendChild(el("span", "node-bind", bind));
  for (const note of annotations) {
    if (note.kind === "clamp" && note.node === node.id) {
      row.appendChild(el("span", "clamp-note", clampText(note)));
    }
  }
  return row;
}

export function renderGraphPane(container: HTMLElement, graph: GraphDoc | null): void {
  clear(container);
  if (graph?.veto) {
    const veto = el("div", "veto-note");
    veto.appendChild(el("span", "veto-rule", graph.veto.rule_name));
    veto.appendChild(el("span", "veto-reason", graph.veto.reason));
    container.appendChild(veto);
  }
  if (!graph || graph.nodes.length === 0) {
    container.appendChild(el("div", "notice-empty", "no instrument execution"));
    return;
  }
  const loopIds = new Set(graph.loop?.member_ids ?? []);
  let loopSection: HTMLElement | null = null;
  for (const node of graph.nodes) {
    if (loopIds.has(node.id)) {
      if (loopSection === null) {
        loopSection = el("section", "loop-region");
        const loop = graph.loop!;
        loopSection.appendChild(
          el(
            "div",
            "loop-header",
            `loop: up to ${loop.max_iterations} iterations, until ${loop.condition_node} passes`,
          ),
        );
        container.appendChild(loopSection);
      }
      loopSection.appendChild(nodeRow(node, graph.safety_annotations));
    } else {
      loopSection = null;
      container.appendChild(nodeRow(node, graph.safety_annotations));
    }
  }
}

// -------------------------------------------------------------- events pane

function eventSummary(doc: EventDoc): string {
  const p = doc.payload;
  switch (doc.event) {
    case "stage": {
      const label = (p["route_label"] ?? p["task_class"] ?? "") as string;
      return `${String(p["stage"])} ${label}`.trim();
    }
    case "precheck": {
      const checks = (p["checks"] as unknown[] | undefined) ?? [];
      return checks.length === 0 ? "ok" : `${checks.length} checks ok`;
    }
    case "execute": {
      if (typeof p["tool"] === "string") return `tool ${p["tool"]}`;
      const commands = (p["commands"] as unknown[] | undefined) ?? [];
      const readback = p["readback"];
      const parts = [`${commands.length} cmds`];
      if (typeof readback === "string" && readback) parts.push(readback);
      return parts.join(" ");
    }
    case "verify": {
      const outcome = String(p["outcome"] ?? "");
      if (typeof p["field"] === "string") {
        return `${outcome} ${p["field"]}=${fmtValue(p["observed"])}`;
      }
      return outcome;
    }
    case "commit": {
      const values = (p["values"] as Record<string, unknown> | undefined) ?? {};
      const pairs = Object.entries(values).map(([k, v]) => `${k}=${fmtValue(v)}`);
      return pairs.length > 0 ? pairs.join(" ") : "committed";
    }
    case "failure":
      return `${String(p["outcome"] ?? "")}: ${String(p["detail"] ?? "")}`;
    case "outcome":
      return `${String(p["outcome"] ?? "")} ${String(p["summary"] ?? "")}`.trim();
    default:
      return "";
  }
}

function isFailedEvent(doc: EventDoc): boolean {
  if (doc.event === "failure") return true;
  return doc.event === "verify" && doc.payload["outcome"] !== "ok";
}

export function renderEventRow(item: IndexedEvent): HTMLElement {
  const { index, doc } = item;
  const row = el("div", `event-row event-${doc.event}`);
  if (isFailedEvent(doc)) row.classList.add("event-failed");
  row.dataset["index"] = String(index);
  if (doc.seq !== undefined) row.dataset["seq"] = String(doc.seq);
  row.appendChild(el("span", "event-seq", doc.seq !== undefined ? String(doc.seq) : "·"));
  row.appendChild(el("span", "event-kind", doc.event));
  if (doc.node_id) row.appendChild(el("span", "event-node", doc.node_id));
  row.appendChild(el("span", "event-detail", eventSummary(doc)));
  return row;
}

export function renderEventsPane(container: HTMLElement, events: IndexedEvent[]): void {
  clear(container);
  if (events.length === 0) {
    container.appendChild(el("div", "notice-empty", "no events"));
    return;
  }
  for (const item of events) {
    container.appendChild(renderEventRow(item));
  }
}

// -------------------------------------------------------------- state panel

export function renderStatePanel(container: HTMLElement, state: StateDoc | null): void {
  clear(container);
  if (!state) {
    container.appendChild(el("div", "notice-empty", "state unknown"));
    return;
  }
  const table = el("table", "state-table");
  for (const name of Object.keys(state.fields).sort()) {
    const field = state.fields[name]!;
    const tr = el("tr", "state-row");
    tr.dataset["field"] = name;
    tr.appendChild(el("td", "state-name", name));
    tr.appendChild(el("td", "state-value", fmtValue(field.value)));
    const badgeCell = el("td");
    badgeCell.appendChild(el("span", `status-badge status-${field.status}`, field.status));
    tr.appendChild(badgeCell);
    table.appendChild(tr);
  }
  container.appendChild(table);
  if (state.unresolved_failures.length > 0) {
    container.appendChild(
      el(
        "div",
        "state-failures",
        `unresolved: ${state.unresolved_failures.join(", ")}`,
      ),
    );
  }
}

// ------------------------------------------------------------------ banners

export function renderBanner(
  container: HTMLElement,
  banner: BlockedBanner | null,
  onAck: (runId: string) => void,
): void {
  clear(container);
  if (banner === null) return;
  const box = el("div", "banner-blocked");
  box.appendChild(el("span", "banner-title", "Blocked"));
  box.appendChild(el("span", "banner-rule", banner.ruleName));
  if (banner.reason) box.appendChild(el("span", "banner-reason", banner.reason));
  const button = el("button", "ack-button", "Acknowledge") as HTMLButtonElement;
  button.addEventListener("click", () => onAck(banner.runId));
  box.appendChild(button);
  container.appendChild(box);
}

export function renderConnectivity(
  container: HTMLElement,
  degraded: boolean,
  streamLost: boolean,
  onRetry: () => void,
): void {
  clear(container);
  if (!degraded && !streamLost) return;
  const box = el("div", "banner-connectivity");
  box.appendChild(
    el(
      "span",
      "connectivity-text",
      streamLost ? "event stream lost" : "gateway unreachable",
    ),
  );
  const button = el("button", "retry-button", "Retry") as HTMLButtonElement;
  button.addEventListener("click", onRetry);
  box.appendChild(button);
  container.appendChild(box);
}
