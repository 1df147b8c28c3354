import type {
  ConfigRequest,
  EnvSettings,
  ObsMessage,
  ServerMessage,
  StepReply,
} from "./messages.js";
import { PROTOCOL_VERSION } from "./messages.js";
import { BridgeError, StdioTransport } from "./transport.js";
import { decodeImage } from "./image.js";

export interface AgentObservation {
  /** Unit bearings to visible neighbors; a multiset, order carries no meaning. */
  bearings: [number, number][];
  /** 75x75 binary rasterization, flat row-major. */
  image: Uint8Array;
}

export interface AgentInfo {
  local: number;
  global: number;
  connected: boolean;
  dGlobal: number;
}

export interface StepResult {
  observations: Record<string, AgentObservation>;
  rewards: Record<string, number>;
  terminations: Record<string, boolean>;
  truncations: Record<string, boolean>;
  infos: Record<string, AgentInfo>;
}

export interface BridgeEnvOptions {
  /** Command that starts the environment server; defaults to SWARMGATHER_CMD or `python3 -m swarmgather`. */
  command?: string[];
  cwd?: string;
  env?: EnvSettings;
  positions?: [number, number][];
  scenarioPath?: string;
  generate?: ConfigRequest["generate"];
}

function defaultCommand(): string[] {
  const fromEnv = process.env.SWARMGATHER_CMD;
  const base = fromEnv ? fromEnv.split(" ") : ["python3", "-m", "swarmgather"];
  return [...base, "serve"];
}

/**
 * Parallel multi-agent environment over a `swarmgather serve` child process.
 * All simulation numerics live on the Python side; this class only speaks
 * the wire protocol.
 *
 * ```ts
 * const env = await BridgeEnv.launch({ positions: [[0, 0], [40, 0]] });
 * let obs = await env.reset();
 * const result = await env.step({ agent_0: [0, 1], agent_1: [Math.PI, 1] });
 * await env.close();
 * ```
 */
export class BridgeEnv {
  readonly agents: string[];
  readonly numAgents: number;
  readonly envConfig: { v: number; sMax: number; convRadius: number; cutoffSteps: number };
  private transport: StdioTransport;
  private episodeOver = true;
  private closed = false;

  private constructor(
    transport: StdioTransport,
    agents: string[],
    envConfig: BridgeEnv["envConfig"],
  ) {
    this.transport = transport;
    this.agents = agents;
    this.numAgents = agents.length;
    this.envConfig = envConfig;
  }

  static async launch(options: BridgeEnvOptions): Promise<BridgeEnv> {
    const transport = new StdioTransport(options.command ?? defaultCommand(), options.cwd);
    const hello = await transport.request({ type: "hello", version: PROTOCOL_VERSION });
    if (hello.type !== "hello") {
      await transport.close();
      throw new BridgeError(`handshake failed: ${JSON.stringify(hello)}`);
    }
    const config: ConfigRequest = { type: "config", env: options.env ?? {} };
    if (options.positions) config.positions = options.positions;
    else if (options.scenarioPath) config.scenario_path = options.scenarioPath;
    else if (options.generate) config.generate = options.generate;
    else {
      await transport.close();
      throw new BridgeError("need one of: positions, scenarioPath, generate");
    }
    const reply = await transport.request(config);
    if (reply.type !== "config") {
      await transport.close();
      throw new BridgeError(`config rejected: ${JSON.stringify(reply)}`);
    }
    const agents = Array.from({ length: reply.n }, (_, i) => `agent_${i}`);
    return new BridgeEnv(transport, agents, {
      v: reply.env.v,
      sMax: reply.env.s_max,
      convRadius: reply.env.conv_radius,
      cutoffSteps: reply.env.cutoff_steps,
    });
  }

  private decodeObservations(obs: ObsMessage): Record<string, AgentObservation> {
    const observations: Record<string, AgentObservation> = {};
    obs.agents.forEach((agent, i) => {
      observations[this.agents[i]] = {
        bearings: agent.bearings,
        image: decodeImage(agent.image),
      };
    });
    return observations;
  }

  private ensureOpen(): void {
    if (this.closed || !this.transport.alive) {
      throw new BridgeError("bridge is closed");
    }
  }

  async reset(): Promise<Record<string, AgentObservation>> {
    this.ensureOpen();
    const reply = await this.transport.request({ type: "reset" });
    if (reply.type !== "obs") {
      throw new BridgeError(`reset failed: ${JSON.stringify(reply)}`);
    }
    this.episodeOver = false;
    return this.decodeObservations(reply);
  }

  async step(actions: Record<string, [number, number]>): Promise<StepResult> {
    this.ensureOpen();
    if (this.episodeOver) {
      throw new BridgeError("episode is over; call reset() first");
    }
    const missing = this.agents.filter((id) => !(id in actions));
    const unknown = Object.keys(actions).filter((id) => !this.agents.includes(id));
    if (missing.length || unknown.length) {
      throw new BridgeError(
        `wrong agent set: missing [${missing.join(", ")}], unknown [${unknown.join(", ")}]`,
      );
    }
    const ordered = this.agents.map((id) => actions[id]);
    const reply = (await this.transport.request({
      type: "act",
      actions: ordered,
    })) as ServerMessage;
    if (reply.type !== "reward" && reply.type !== "done") {
      throw new BridgeError(`step failed: ${JSON.stringify(reply)}`);
    }
    const step = reply as StepReply;
    const terminated = step.type === "done" && step.outcome === "converged";
    const truncated = step.type === "done" && step.outcome === "truncated";
    if (step.type === "done") this.episodeOver = true;

    const result: StepResult = {
      observations: this.decodeObservations(step.obs),
      rewards: {},
      terminations: {},
      truncations: {},
      infos: {},
    };
    this.agents.forEach((id, i) => {
      result.rewards[id] = step.rewards[i].total;
      result.terminations[id] = terminated;
      result.truncations[id] = truncated;
      result.infos[id] = {
        local: step.rewards[i].local,
        global: step.rewards[i].global,
        connected: step.connected,
        dGlobal: step.d_global,
      };
    });
    return result;
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    await this.transport.close();
  }
}
