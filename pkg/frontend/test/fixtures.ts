import { readFileSync } from "node:fs";
import type { EventDoc, RunDetail } from "../src/types.js";

export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export interface RunFixture {
  detail: RunDetail;
  events: EventDoc[];
}

/** Load the captured detail + event stream for a fixture stem like "e1". */
export function runFixture(stem: string): RunFixture {
  return {
    detail: loadFixture<RunDetail>(`${stem}_run`),
    events: loadFixture<EventDoc[]>(`${stem}_events`),
  };
}
