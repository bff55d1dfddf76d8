import type {
  ContractDoc,
  EventDoc,
  GraphDoc,
  IndexedEvent,
  RunRecord,
  StateDoc,
} from "./types.js";
import type { StreamStatus } from "./sse.js";

export interface BlockedBanner {
  runId: string;
  ruleName: string;
  reason: string;
}

export type Connectivity = "ok" | "degraded";

/**
 * Console state, kept free of DOM concerns so it can be unit tested.
 * Event order is owned by the gateway's stream ids; the model only
 * enforces that nothing is ever inserted out of order or twice.
 */
export class ConsoleModel {
  private records = new Map<string, RunRecord>();
  private order: string[] = []; // newest first
  private eventsByRun = new Map<string, IndexedEvent[]>();
  private details = new Map<string, { contract: ContractDoc | null; graph: GraphDoc | null }>();

  selectedRunId: string | null = null;
  state: StateDoc | null = null;
  connectivity: Connectivity = "ok";
  streamStatus: StreamStatus | null = null;

  upsertRun(record: RunRecord): void {
    if (!this.records.has(record.run_id)) {
      this.order.unshift(record.run_id);
    }
    this.records.set(record.run_id, record);
    if (this.selectedRunId === null) this.selectedRunId = record.run_id;
  }

  setDetail(runId: string, contract: ContractDoc | null, graph: GraphDoc | null): void {
    this.details.set(runId, { contract, graph });
  }

  detailFor(runId: string): { contract: ContractDoc | null; graph: GraphDoc | null } {
    return this.details.get(runId) ?? { contract: null, graph: null };
  }

  run(runId: string): RunRecord | undefined {
    return this.records.get(runId);
  }

  /** Runs newest first, the order the list pane shows them. */
  runs(): RunRecord[] {
    const rows: RunRecord[] = [];
    for (const id of this.order) {
      const record = this.records.get(id);
      if (record) rows.push(record);
    }
    return rows;
  }

  select(runId: string): void {
    if (this.records.has(runId)) this.selectedRunId = runId;
  }

  eventsFor(runId: string): IndexedEvent[] {
    return this.eventsByRun.get(runId) ?? [];
  }

  /**
   * Append one stream event. Returns false (and changes nothing) when the
   * index is not strictly greater than the last one seen for the run, so
   * replays after a reconnect cannot duplicate or reorder rows.
   */
  appendEvent(runId: string, index: number, doc: EventDoc): boolean {
    let events = this.eventsByRun.get(runId);
    if (events === undefined) {
      events = [];
      this.eventsByRun.set(runId, events);
    }
    const last = events.length > 0 ? events[events.length - 1]!.index : -1;
    if (index <= last) return false;
    events.push({ index, doc });
    return true;
  }

  setState(doc: StateDoc): void {
    this.state = doc;
  }

  acknowledgedBanner(runId: string): void {
    const record = this.records.get(runId);
    if (record) record.acknowledged = true;
  }

  /** Newest blocked, unacknowledged run, if any; drives the banner. */
  banner(): BlockedBanner | null {
    for (const id of this.order) {
      const record = this.records.get(id);
      if (!record || record.outcome !== "Blocked" || record.acknowledged) continue;
      return {
        runId: record.run_id,
        ruleName: record.blocked_by?.rule_name ?? "unknown rule",
        reason: record.blocked_by?.reason ?? "",
      };
    }
    return null;
  }
}
