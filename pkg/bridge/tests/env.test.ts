import { describe, expect, it } from "vitest";

import { BridgeEnv } from "../src/env.js";
import { decodeImage, IMAGE_SIZE } from "../src/image.js";

const TWO_AGENTS: [number, number][] = [
  [0.0, 0.0],
  [40.0, 0.0],
];

/** Independent reimplementation of the ring projection for cross-checking. */
function projectedBlock(ux: number, uy: number): [number, number] {
  const roundHalfAway = (x: number) => (x >= 0 ? Math.floor(x + 0.5) : Math.ceil(x - 0.5));
  const row = 37 - roundHalfAway(35 * uy);
  const col = 37 + roundHalfAway(35 * ux);
  return [row, col];
}

describe("BridgeEnv", () => {
  it("exposes the agent list and resolved env config", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      expect(env.agents).toEqual(["agent_0", "agent_1"]);
      expect(env.envConfig.v).toBe(50.0);
      expect(env.envConfig.sMax).toBe(0.5);
      expect(env.envConfig.cutoffSteps).toBe(300);
    } finally {
      await env.close();
    }
  });

  it("reset returns bearings plus a decodable image per agent", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      const observations = await env.reset();
      expect(observations.agent_0.bearings).toEqual([[1.0, 0.0]]);
      expect(observations.agent_1.bearings).toEqual([[-1.0, 0.0]]);
      const image = observations.agent_0.image;
      expect(image).toHaveLength(IMAGE_SIZE * IMAGE_SIZE);
      let set = 0;
      for (const bit of image) set += bit;
      expect(set).toBe(9); // one neighbor, one 3x3 block
      const [row, col] = projectedBlock(1.0, 0.0);
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          expect(image[(row + dr) * IMAGE_SIZE + (col + dc)]).toBe(1);
        }
      }
    } finally {
      await env.close();
    }
  });

  it("an agent with three visible neighbors reports three bearings", async () => {
    // a five-agent layout where agent 3 sees agents 0..2 but not the far agent 4
    const env = await BridgeEnv.launch({
      positions: [
        [10.0, 0.0],
        [0.0, 20.0],
        [-15.0, -5.0],
        [0.0, 0.0],
        [200.0, 200.0],
      ],
    });
    try {
      const observations = await env.reset();
      expect(observations.agent_3.bearings).toHaveLength(3);
      expect(observations.agent_4.bearings).toHaveLength(0);
      const again = await env.reset();
      expect(again.agent_3.bearings).toEqual(observations.agent_3.bearings);
    } finally {
      await env.close();
    }
  });

  it("every observed block sits on the projected ring position", async () => {
    const env = await BridgeEnv.launch({ generate: { n: 6, V: 50, VR: 0.75, seed: 5 } });
    try {
      const observations = await env.reset();
      for (const id of env.agents) {
        const { bearings, image } = observations[id];
        for (const [ux, uy] of bearings) {
          const [row, col] = projectedBlock(ux, uy);
          expect(image[row * IMAGE_SIZE + col]).toBe(1);
        }
      }
    } finally {
      await env.close();
    }
  });

  it("all-zero sigma collects exactly the per-step penalty", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      await env.reset();
      const result = await env.step({ agent_0: [0.0, 0.0], agent_1: [1.5, 0.0] });
      expect(result.rewards.agent_0).toBe(-0.01);
      expect(result.rewards.agent_1).toBe(-0.01);
      expect(result.infos.agent_0.global).toBe(0.0);
    } finally {
      await env.close();
    }
  });

  it("out-of-range alpha behaves exactly like its wrapped value", async () => {
    const streams: number[][] = [];
    for (const alpha of [3 * Math.PI + 0.25, 0.25 + Math.PI]) {
      const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
      try {
        await env.reset();
        const rewards: number[] = [];
        for (let step = 0; step < 5; step++) {
          const result = await env.step({
            agent_0: [alpha, 0.7],
            agent_1: [0.0, 0.3],
          });
          rewards.push(result.rewards.agent_0, result.rewards.agent_1);
        }
        streams.push(rewards);
      } finally {
        await env.close();
      }
    }
    expect(streams[0]).toEqual(streams[1]);
  });

  it("rejects a wrong agent set and names the missing ids", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      await env.reset();
      await expect(
        env.step({ agent_0: [0, 0] } as Record<string, [number, number]>),
      ).rejects.toThrow(/missing \[agent_1\]/);
      await expect(
        env.step({ agent_0: [0, 0], agent_1: [0, 0], ghost: [0, 0] }),
      ).rejects.toThrow(/unknown \[ghost\]/);
    } finally {
      await env.close();
    }
  });

  it("step before reset and use after close both fail cleanly", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    await expect(env.step({ agent_0: [0, 0], agent_1: [0, 0] })).rejects.toThrow(/reset/);
    await env.close();
    await expect(env.reset()).rejects.toThrow(/closed/);
  });

  it("resetting mid-run restores the initial constellation", async () => {
    const env = await BridgeEnv.launch({ positions: TWO_AGENTS });
    try {
      const first = await env.reset();
      await env.step({ agent_0: [0.0, 1.0], agent_1: [Math.PI, 1.0] });
      const second = await env.reset();
      expect(second.agent_0.bearings).toEqual(first.agent_0.bearings);
    } finally {
      await env.close();
    }
  });

  it("decodeImage rejects payloads of the wrong size", () => {
    expect(() => decodeImage(Buffer.from("short").toString("base64"))).toThrow(/750/);
  });
});
