import type {
  BenchmarkCase,
  RunDetail,
  RunRecord,
  StateDoc,
  SubmitReply,
} from "./types.js";
import { TERMINAL_OUTCOMES } from "./types.js";

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export interface WaitOptions {
  intervalMs?: number;
  timeoutMs?: number;
}

/**
 * Read/submit client for the gateway. The console never writes anything
 * except new intents and acknowledgements; every other call is a GET.
 */
export class GatewayClient {
  private readonly fetchImpl: typeof fetch;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: typeof fetch,
  ) {
    const impl = fetchImpl ?? fetch;
    this.fetchImpl = (input, init) => impl(input, init);
  }

  url(path: string): string {
    return this.baseUrl + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(path), init);
    } catch (err) {
      throw new GatewayError(0, `gateway unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = String(body.detail);
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new GatewayError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  submitIntent(utterance: string): Promise<SubmitReply> {
    return this.request<SubmitReply>("/intents", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ utterance }),
    });
  }

  async listRuns(): Promise<RunRecord[]> {
    const body = await this.request<{ runs: RunRecord[] }>("/runs");
    return body.runs;
  }

  getRun(runId: string): Promise<RunDetail> {
    return this.request<RunDetail>(`/runs/${encodeURIComponent(runId)}`);
  }

  acknowledge(runId: string): Promise<RunRecord> {
    return this.request<RunRecord>(
      `/runs/${encodeURIComponent(runId)}/ack`,
      { method: "POST" },
    );
  }

  getState(): Promise<StateDoc> {
    return this.request<StateDoc>("/state");
  }

  async getBenchmark(): Promise<BenchmarkCase[]> {
    const body = await this.request<{ cases: BenchmarkCase[] }>("/benchmark");
    return body.cases;
  }

  /** Poll the run record until the gateway reports a terminal outcome. */
  async waitForTerminal(
    runId: string,
    opts: WaitOptions = {},
  ): Promise<RunDetail> {
    const interval = opts.intervalMs ?? 150;
    const deadline = Date.now() + (opts.timeoutMs ?? 60_000);
    for (;;) {
      const detail = await this.getRun(runId);
      if (TERMINAL_OUTCOMES.has(detail.record.outcome)) return detail;
      if (Date.now() > deadline) {
        throw new GatewayError(0, `run ${runId} did not reach a terminal outcome in time`);
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
