import { GatewayClient } from "./api.js";
import { ConsoleModel } from "./model.js";
import { EventStream, type EventStreamOptions, type StreamStatus } from "./sse.js";
import {
  renderBanner,
  renderConnectivity,
  renderContractPane,
  renderEventsPane,
  renderGraphPane,
  renderRunsList,
  renderStatePanel,
} from "./render.js";
import type { RunRecord } from "./types.js";

export interface ConsoleOptions {
  pollIntervalMs?: number;
  pollTimeoutMs?: number;
  stream?: EventStreamOptions;
}

export interface ConsoleElements {
  input: HTMLInputElement;
  form: HTMLFormElement;
  runsList: HTMLElement;
  contractPane: HTMLElement;
  graphPane: HTMLElement;
  eventsPane: HTMLElement;
  statePanel: HTMLElement;
  bannerBox: HTMLElement;
  connectivityBox: HTMLElement;
}

export interface ConsoleApp {
  model: ConsoleModel;
  elements: ConsoleElements;
  submit(utterance: string): Promise<string>;
  selectRun(runId: string): Promise<void>;
  ack(runId: string): Promise<void>;
  refresh(): Promise<void>;
  dispose(): void;
}

function pane(className: string, title?: string): HTMLElement {
  const section = document.createElement("section");
  section.className = `pane ${className}`;
  if (title) {
    const h = document.createElement("h2");
    h.textContent = title;
    section.appendChild(h);
  }
  return section;
}

function buildSkeleton(root: HTMLElement): ConsoleElements {
  root.replaceChildren();

  const connectivityBox = document.createElement("div");
  connectivityBox.className = "connectivity-box";
  const bannerBox = document.createElement("div");
  bannerBox.className = "banner-box";
  root.appendChild(connectivityBox);
  root.appendChild(bannerBox);

  const grid = document.createElement("div");
  grid.className = "console-grid";
  root.appendChild(grid);

  const intents = pane("pane-intents", "Intents");
  const form = document.createElement("form");
  form.className = "intent-form";
  const input = document.createElement("input");
  input.type = "text";
  input.className = "intent-input";
  input.placeholder = "describe a measurement…";
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Submit";
  form.appendChild(input);
  form.appendChild(button);
  intents.appendChild(form);
  const runsList = document.createElement("div");
  runsList.className = "runs-list";
  intents.appendChild(runsList);

  const plan = pane("pane-plan", "Plan");
  const contractPane = document.createElement("div");
  contractPane.className = "contract-pane";
  const graphPane = document.createElement("div");
  graphPane.className = "graph-pane";
  plan.appendChild(contractPane);
  plan.appendChild(graphPane);

  const execution = pane("pane-execution", "Execution");
  const eventsPane = document.createElement("div");
  eventsPane.className = "events-pane";
  const statePanel = document.createElement("div");
  statePanel.className = "state-panel";
  execution.appendChild(eventsPane);
  execution.appendChild(statePanel);

  grid.appendChild(intents);
  grid.appendChild(plan);
  grid.appendChild(execution);

  return {
    input,
    form,
    runsList,
    contractPane,
    graphPane,
    eventsPane,
    statePanel,
    bannerBox,
    connectivityBox,
  };
}

export function createConsole(
  root: HTMLElement,
  client: GatewayClient,
  opts: ConsoleOptions = {},
): ConsoleApp {
  const model = new ConsoleModel();
  const elements = buildSkeleton(root);
  const streams = new Map<string, EventStream>();
  let streamLost = false;

  function renderRuns(): void {
    renderRunsList(elements.runsList, model.runs(), model.selectedRunId, (id) => {
      void selectRun(id);
    });
  }

  function renderSelected(): void {
    const runId = model.selectedRunId;
    const record = runId ? model.run(runId) : undefined;
    const detail = runId ? model.detailFor(runId) : { contract: null, graph: null };
    renderContractPane(elements.contractPane, record, detail.contract);
    renderGraphPane(elements.graphPane, detail.graph);
    renderEventsPane(elements.eventsPane, runId ? model.eventsFor(runId) : []);
  }

  function renderBanners(): void {
    renderBanner(elements.bannerBox, model.banner(), (id) => {
      void ack(id);
    });
    renderConnectivity(
      elements.connectivityBox,
      model.connectivity === "degraded",
      streamLost,
      () => {
        streamLost = false;
        void refresh();
        const runId = model.selectedRunId;
        if (runId) void watch(runId);
      },
    );
  }

  function renderAll(): void {
    renderRuns();
    renderSelected();
    renderStatePanel(elements.statePanel, model.state);
    renderBanners();
  }

  function onStreamStatus(status: StreamStatus): void {
    model.streamStatus = status;
    if (status === "lost") {
      streamLost = true;
      renderBanners();
    }
  }

  /** Follow a run's event stream until its terminal event. */
  function watch(runId: string): Promise<StreamStatus> {
    const existing = streams.get(runId);
    if (existing) existing.stop();
    const stream = new EventStream(
      client.url(`/runs/${encodeURIComponent(runId)}/events`),
      (index, doc) => {
        if (model.appendEvent(runId, index, doc) && model.selectedRunId === runId) {
          renderEventsPane(elements.eventsPane, model.eventsFor(runId));
        }
      },
      onStreamStatus,
      opts.stream ?? {},
    );
    streams.set(runId, stream);
    return stream.start();
  }

  async function loadDetail(runId: string): Promise<void> {
    const detail = await client.getRun(runId);
    model.upsertRun(detail.record);
    model.setDetail(runId, detail.contract, detail.graph);
  }

  async function submit(utterance: string): Promise<string> {
    const text = utterance.trim();
    if (!text) throw new Error("empty intent");
    try {
      const reply = await client.submitIntent(text);
      const placeholder: RunRecord = {
        run_id: reply.run_id,
        utterance: text,
        outcome: "Queued",
        acknowledged: false,
        created_at: Date.now() / 1000,
      };
      model.upsertRun(placeholder);
      model.select(reply.run_id);
      renderAll();

      const streamDone = watch(reply.run_id);
      const detail = await client.waitForTerminal(reply.run_id, {
        intervalMs: opts.pollIntervalMs ?? 150,
        timeoutMs: opts.pollTimeoutMs ?? 60_000,
      });
      await streamDone;
      model.upsertRun(detail.record);
      model.setDetail(reply.run_id, detail.contract, detail.graph);
      model.setState(await client.getState());
      model.connectivity = "ok";
      renderAll();
      return reply.run_id;
    } catch (err) {
      model.connectivity = "degraded";
      renderBanners();
      throw err;
    }
  }

  async function selectRun(runId: string): Promise<void> {
    model.select(runId);
    if (model.detailFor(runId).contract === null && model.detailFor(runId).graph === null) {
      try {
        await loadDetail(runId);
      } catch {
        // keep whatever we have; pane shows the placeholder
      }
    }
    renderAll();
  }

  async function ack(runId: string): Promise<void> {
    const record = await client.acknowledge(runId);
    model.upsertRun(record);
    renderAll();
  }

  async function refresh(): Promise<void> {
    try {
      const records = await client.listRuns();
      for (let i = records.length - 1; i >= 0; i -= 1) {
        model.upsertRun(records[i]!);
      }
      model.setState(await client.getState());
      model.connectivity = "ok";
    } catch {
      model.connectivity = "degraded";
    }
    renderAll();
  }

  function dispose(): void {
    for (const stream of streams.values()) stream.stop();
    streams.clear();
  }

  elements.form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = elements.input.value;
    elements.input.value = "";
    void submit(text).catch(() => undefined);
  });

  renderAll();
  return { model, elements, submit, selectRun, ack, refresh, dispose };
}
