import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Window } from "happy-dom";
import {
  clampText,
  renderBanner,
  renderContractPane,
  renderEventsPane,
  renderGraphPane,
  renderStatePanel,
} from "../src/render.js";
import type { EventDoc, IndexedEvent, StateDoc } from "../src/types.js";
import { loadFixture, runFixture } from "./fixtures.js";

// Render builders only need a document; a detached happy-dom window keeps
// these tests in the plain node environment (native fetch stays intact for
// the round-trip suite).
let windowHandle: Window;

beforeAll(() => {
  windowHandle = new Window();
  (globalThis as Record<string, unknown>)["document"] = windowHandle.document;
});

afterAll(() => {
  delete (globalThis as Record<string, unknown>)["document"];
  windowHandle.close();
});

function container(): HTMLElement {
  return document.createElement("div");
}

describe("graph pane", () => {
  it("highlights the clamp annotation on the clamped node", () => {
    const m4 = runFixture("m4");
    const box = container();
    renderGraphPane(box, m4.detail.graph);
    const note = box.querySelector(".clamp-note");
    expect(note).not.toBeNull();
    expect(note!.textContent).toBe("clamped 25 → 10 dBm");
    const row = note!.closest(".graph-node") as HTMLElement;
    expect(row.dataset["nodeId"]).toBe("set_power");
  });

  it("groups loop members into a labelled region", () => {
    const h1 = runFixture("h1");
    const box = container();
    renderGraphPane(box, h1.detail.graph);
    const region = box.querySelector(".loop-region");
    expect(region).not.toBeNull();
    const members = region!.querySelectorAll(".graph-node");
    expect(members.length).toBe(h1.detail.graph!.loop!.member_ids.length);
    const header = region!.querySelector(".loop-header");
    expect(header!.textContent).toContain("up to 8 iterations");
    expect(header!.textContent).toContain("until check passes");
    // Nodes outside the loop stay outside the region.
    const outside = [...box.children].filter((c) => c.classList.contains("graph-node"));
    expect(outside.length).toBe(
      h1.detail.graph!.nodes.length - h1.detail.graph!.loop!.member_ids.length,
    );
  });

  it("shows a notice instead of an empty node list for conversational runs", () => {
    const conv = runFixture("conversational");
    const box = container();
    renderGraphPane(box, conv.detail.graph);
    expect(box.querySelector(".notice-empty")!.textContent).toBe("no instrument execution");
    expect(box.querySelectorAll(".graph-node").length).toBe(0);
  });

  it("surfaces a veto with the rule that fired", () => {
    const e9 = runFixture("e9");
    const box = container();
    renderGraphPane(box, e9.detail.graph);
    const veto = box.querySelector(".veto-note");
    expect(veto).not.toBeNull();
    expect(veto!.querySelector(".veto-rule")!.textContent).toBe("calibration_protection");
  });

  it("formats clamp text with the field unit", () => {
    expect(
      clampText({
        kind: "clamp",
        rule: "max_output_power",
        node: "set_power",
        field: "output_power_dbm",
        requested: 25.0,
        applied: 10.0,
      }),
    ).toBe("clamped 25 → 10 dBm");
  });
});

describe("events pane", () => {
  function indexed(docs: EventDoc[]): IndexedEvent[] {
    return docs.map((doc, i) => ({ index: i, doc }));
  }

  it("renders rows in stream order with seq attributes", () => {
    const e1 = runFixture("e1");
    const box = container();
    renderEventsPane(box, indexed(e1.events));
    const rows = [...box.querySelectorAll(".event-row")] as HTMLElement[];
    expect(rows.length).toBe(e1.events.length);
    expect(rows.map((r) => Number(r.dataset["index"]))).toEqual(
      e1.events.map((_, i) => i),
    );
    const seqs = rows
      .filter((r) => r.dataset["seq"] !== undefined)
      .map((r) => Number(r.dataset["seq"]));
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    expect(seqs.length).toBeGreaterThan(0);
  });

  it("marks failed verification distinctly from ok rows", () => {
    const okVerify: EventDoc = {
      event: "verify",
      node_id: "set_power",
      payload: { outcome: "ok", field: "output_power_dbm", observed: 10 },
      timestamp: 0,
      seq: 3,
    };
    const badVerify: EventDoc = {
      event: "verify",
      node_id: "set_power",
      payload: { outcome: "mismatch", field: "output_power_dbm", observed: 9.4 },
      timestamp: 0,
      seq: 4,
    };
    const failure: EventDoc = {
      event: "failure",
      node_id: "set_power",
      payload: {
        node_id: "set_power",
        outcome: "mismatch",
        detail: "output_power_dbm reads 9.4, expected 10",
        recommended_recovery: "retry_then_report",
      },
      timestamp: 0,
    };
    const box = container();
    renderEventsPane(box, indexed([okVerify, badVerify, failure]));
    const rows = [...box.querySelectorAll(".event-row")];
    expect(rows[0]!.classList.contains("event-failed")).toBe(false);
    expect(rows[1]!.classList.contains("event-failed")).toBe(true);
    expect(rows[2]!.classList.contains("event-failed")).toBe(true);
    expect(rows[2]!.textContent).toContain("expected 10");
  });
});

describe("state panel", () => {
  it("shows each field with value and status badge", () => {
    const state = loadFixture<StateDoc>("state_after_e1");
    const box = container();
    renderStatePanel(box, state);
    const row = box.querySelector('[data-field="center_frequency_hz"]') as HTMLElement;
    expect(row).not.toBeNull();
    expect(row.querySelector(".state-value")!.textContent).toBe("3000000000");
    const badge = row.querySelector(".status-badge")!;
    expect(badge.textContent).toBe("confirmed");
    expect(badge.classList.contains("status-confirmed")).toBe(true);
  });
});

describe("contract pane", () => {
  it("shows the grounding error text for runs that never produced a contract", () => {
    const err = runFixture("error");
    const box = container();
    renderContractPane(box, err.detail.record, err.detail.contract);
    const row = box.querySelector(".error-row");
    expect(row).not.toBeNull();
    expect(row!.textContent).toContain("no task family matches");
  });

  it("lists contract parameters and safety flags", () => {
    const m4 = runFixture("m4");
    const box = container();
    renderContractPane(box, m4.detail.record, m4.detail.contract);
    expect(box.textContent).toContain("output_power_dbm");
    expect(box.querySelectorAll(".safety-flag").length).toBeGreaterThan(0);
  });
});

describe("blocked banner", () => {
  it("names the rule and wires the acknowledge button", () => {
    const box = container();
    let acked: string | null = null;
    renderBanner(
      box,
      { runId: "run-x", ruleName: "calibration_protection", reason: "policy" },
      (runId) => {
        acked = runId;
      },
    );
    expect(box.querySelector(".banner-rule")!.textContent).toBe("calibration_protection");
    (box.querySelector(".ack-button") as HTMLButtonElement).click();
    expect(acked).toBe("run-x");
  });

  it("clears when there is nothing to acknowledge", () => {
    const box = container();
    renderBanner(box, { runId: "r", ruleName: "x", reason: "" }, () => undefined);
    renderBanner(box, null, () => undefined);
    expect(box.children.length).toBe(0);
  });
});
