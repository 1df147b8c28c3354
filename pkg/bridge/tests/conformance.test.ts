import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { BridgeEnv } from "../src/env.js";

const TWO_AGENTS: [number, number][] = [
  [0.0, 0.0],
  [40.0, 0.0],
];

interface TraceRecord {
  type: string;
  t: number;
  actions: [number, number][];
  rewards: { local: number[]; global: number[]; total: number[] };
  connected: boolean;
  d_global: number;
}

let workDir: string;
let header: { steps: number; outcome: string; n: number };
let records: TraceRecord[];

beforeAll(() => {
  workDir = mkdtempSync(join(tmpdir(), "swarmgather-bridge-"));
  const scenarioPath = join(workDir, "two_agents_40.json");
  writeFileSync(
    scenarioPath,
    JSON.stringify({
      version: 1,
      n: 2,
      V: 50.0,
      VR: 0.75,
      seed: 0,
      min_separation: 1.0,
      positions: TWO_AGENTS,
    }) + "\n",
  );
  const tracePath = join(workDir, "native.jsonl");
  execFileSync("python3", [
    "-m",
    "swarmgather",
    "run",
    "--scenario",
    scenarioPath,
    "--controller",
    "analytical",
    "--trace",
    tracePath,
  ]);
  const lines = readFileSync(tracePath, "utf-8").trim().split("\n");
  header = JSON.parse(lines[0]);
  records = lines.slice(1).map((line) => JSON.parse(line) as TraceRecord);
});

describe("bridge conformance against the native trace", () => {
  it("native episode converges at step 30", () => {
    expect(header.outcome).toBe("converged");
    expect(header.steps).toBe(30);
    expect(records).toHaveLength(30);
  });

  it("replaying the traced actions reproduces the stream bit-exactly", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      await env.reset();
      for (const [index, record] of records.entries()) {
        const actions: Record<string, [number, number]> = {
          agent_0: record.actions[0],
          agent_1: record.actions[1],
        };
        const result = await env.step(actions);
        // JSON floats decode to the same IEEE-754 doubles on both sides, so
        // equality here is bit-exact, not approximate
        expect(result.rewards.agent_0).toBe(record.rewards.total[0]);
        expect(result.rewards.agent_1).toBe(record.rewards.total[1]);
        expect(result.infos.agent_0.local).toBe(record.rewards.local[0]);
        expect(result.infos.agent_0.global).toBe(record.rewards.global[0]);
        expect(result.infos.agent_0.dGlobal).toBe(record.d_global);
        expect(result.infos.agent_0.connected).toBe(record.connected);
        const done = index === records.length - 1;
        expect(result.terminations.agent_0).toBe(done);
        expect(result.truncations.agent_0).toBe(false);
      }
    } finally {
      await env.close();
    }
  }, 30000);

  it("a scripted head-on approach converges at exactly step 30", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      await env.reset();
      for (let step = 1; step <= 30; step++) {
        const result = await env.step({
          agent_0: [0.0, 1.0],
          agent_1: [Math.PI, 1.0],
        });
        expect(result.terminations.agent_0).toBe(step === 30);
      }
    } finally {
      await env.close();
    }
  }, 30000);
});
