/** Wire message shapes for the swarmgather line protocol (version 1). */

export const PROTOCOL_VERSION = 1;

export interface HelloMessage {
  type: "hello";
  version: number;
}

export interface EnvSettings {
  v?: number;
  s_max?: number;
  conv_radius?: number;
  cutoff_steps?: number;
  reward?: {
    p_ln?: number;
    p_acc?: number;
    c_g?: number;
    neighbor_loss_mode?: "count" | "set";
  };
}

export interface ConfigRequest {
  type: "config";
  env?: EnvSettings;
  positions?: [number, number][];
  scenario_path?: string;
  generate?: {
    n: number;
    V?: number;
    VR?: number;
    seed?: number;
    min_separation?: number;
  };
}

export interface ConfigReply {
  type: "config";
  n: number;
  env: { v: number; s_max: number; conv_radius: number; cutoff_steps: number };
}

export interface WireAgentObservation {
  bearings: [number, number][];
  image: string; // base64 of the packed 750-byte rasterized observation
}

export interface ObsMessage {
  type: "obs";
  t: number;
  agents: WireAgentObservation[];
}

export interface ActRequest {
  type: "act";
  actions: [number, number][];
}

export interface RewardEntry {
  local: number;
  global: number;
  total: number;
}

export interface StepReply {
  type: "reward" | "done";
  t: number;
  rewards: RewardEntry[];
  connected: boolean;
  d_global: number;
  obs: ObsMessage;
  outcome?: "converged" | "truncated";
  steps?: number;
}

export interface ErrorMessage {
  type: "error";
  message: string;
  fatal: boolean;
}

export interface ByeMessage {
  type: "bye";
}

export type ServerMessage =
  | HelloMessage
  | ConfigReply
  | ObsMessage
  | StepReply
  | ErrorMessage
  | ByeMessage;

export type ClientMessage = HelloMessage | ConfigRequest | { type: "reset" } | ActRequest | ByeMessage;
