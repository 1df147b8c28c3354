export { BridgeEnv } from "./env.js";
export type { AgentInfo, AgentObservation, BridgeEnvOptions, StepResult } from "./env.js";
export { BridgeError, StdioTransport } from "./transport.js";
export { decodeImage, IMAGE_SIZE, PACKED_IMAGE_BYTES } from "./image.js";
export { PROTOCOL_VERSION } from "./messages.js";
export type {
  ActRequest,
  ClientMessage,
  ConfigReply,
  ConfigRequest,
  EnvSettings,
  ErrorMessage,
  ObsMessage,
  RewardEntry,
  ServerMessage,
  StepReply,
  WireAgentObservation,
} from "./messages.js";
