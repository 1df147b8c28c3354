"""Line protocol so external processes can drive the environment.

One JSON object per line, strict request/response alternation:

  client -> {"type":"hello","version":1}       server -> hello
  client -> {"type":"config",...}              server -> config (resolved)
  client -> {"type":"reset"}                   server -> obs
  client -> {"type":"act","actions":[[a,s]..]} server -> reward | done
  client -> {"type":"bye"}                     server -> bye

Observations carry raw bearings and the packed 750-byte rasterized image
(standard base64), so clients can use either and cross-check the rasterizer.
A malformed message gets an error reply and the session continues; a
protocol-order violation gets an error reply and the session ends.
"""

from __future__ import annotations

import base64
import json
import socket
import sys

from .constellation import ConstellationSpec, generate, load
from .control import Action
from .engine import EnvConfig, GatheringEnv
from .errors import ProtocolError
from .geometry import SwarmState
from .rewards import RewardConfig
from .sensing import pack_image, rasterize

PROTOCOL_VERSION = 1

MESSAGE_TYPES = ("hello", "config", "reset", "obs", "act", "reward", "done", "error", "bye")


def encode_message(message: dict) -> str:
    return json.dumps(message, separators=(", ", ": "))


def decode_message(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc.msg}") from exc
    if not isinstance(message, dict):
        raise ProtocolError("message must be a JSON object")
    kind = message.get("type")
    if kind not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {kind!r}")
    return message


def _observation_payload(observations) -> list:
    agents = []
    for obs in observations:
        agents.append(
            {
                "bearings": [[float(x), float(y)] for x, y in obs.bearings],
                "image": base64.b64encode(pack_image(rasterize(obs))).decode("ascii"),
            }
        )
    return agents


def _env_config_from_message(doc: dict) -> EnvConfig:
    reward_doc = doc.get("reward", {})
    reward = RewardConfig(
        p_ln=float(reward_doc.get("p_ln", -0.5)),
        p_acc=float(reward_doc.get("p_acc", -0.01)),
        c_g=float(reward_doc.get("c_g", 0.1)),
        neighbor_loss_mode=reward_doc.get("neighbor_loss_mode", "count"),
    )
    cutoff = doc.get("cutoff_steps")
    return EnvConfig(
        v=float(doc.get("v", 50.0)),
        s_max=float(doc.get("s_max", 0.5)),
        conv_radius=float(doc.get("conv_radius", 5.0)),
        cutoff_steps=int(cutoff) if cutoff is not None else None,
        reward=reward,
    )


def _scenario_from_message(message: dict) -> SwarmState:
    if "positions" in message:
        return SwarmState(message["positions"])
    if "scenario_path" in message:
        state, _ = load(message["scenario_path"])
        return state
    if "generate" in message:
        gen = message["generate"]
        spec = ConstellationSpec(
            n_agents=int(gen["n"]),
            visibility=float(gen.get("V", 50.0)),
            visibility_ratio=float(gen.get("VR", 0.75)),
            seed=int(gen.get("seed", 0)),
            min_separation=float(gen.get("min_separation", 1.0)),
        )
        return generate(spec)
    raise ProtocolError("config needs one of: positions, scenario_path, generate")


class ServerSession:
    """Protocol state machine for one client; transport-agnostic."""

    def __init__(self):
        self._stage = "hello"
        self._env = None
        self._env_cfg = None
        self._initial = None
        self.closed = False

    def handle_line(self, line: str) -> str:
        """One request in, one JSON response line out."""
        try:
            message = decode_message(line)
        except ProtocolError as exc:
            return encode_message({"type": "error", "message": str(exc), "fatal": False})
        try:
            return encode_message(self._dispatch(message))
        except ProtocolError as exc:
            self.closed = True
            return encode_message({"type": "error", "message": str(exc), "fatal": True})
        except Exception as exc:
            return encode_message({"type": "error", "message": str(exc), "fatal": False})

    def _dispatch(self, message: dict) -> dict:
        kind = message["type"]
        if kind == "bye":
            self.closed = True
            return {"type": "bye"}
        if kind == "hello":
            if self._stage != "hello":
                raise ProtocolError("hello after handshake")
            version = message.get("version")
            if version != PROTOCOL_VERSION:
                raise ProtocolError(
                    f"unsupported protocol version {version!r}, server speaks {PROTOCOL_VERSION}"
                )
            self._stage = "config"
            return {"type": "hello", "version": PROTOCOL_VERSION}
        if kind == "config":
            if self._stage == "hello":
                raise ProtocolError("config before hello")
            self._env_cfg = _env_config_from_message(message.get("env", {}))
            self._initial = _scenario_from_message(message)
            self._env = GatheringEnv(self._initial, self._env_cfg)
            self._stage = "ready"
            return {
                "type": "config",
                "n": self._initial.n,
                "env": {
                    "v": self._env_cfg.v,
                    "s_max": self._env_cfg.s_max,
                    "conv_radius": self._env_cfg.conv_radius,
                    "cutoff_steps": self._env_cfg.resolved_cutoff(self._initial.n),
                },
            }
        if kind == "reset":
            if self._env is None:
                raise ProtocolError("reset before config")
            observations = self._env.reset()
            self._stage = "stepping"
            return {"type": "obs", "t": 0, "agents": _observation_payload(observations)}
        if kind == "act":
            if self._stage != "stepping":
                raise ProtocolError("act before reset")
            actions_doc = message.get("actions")
            if not isinstance(actions_doc, list) or len(actions_doc) != self._env.n:
                raise ValueError(
                    f"expected {self._env.n} [alpha, sigma] pairs, got "
                    f"{len(actions_doc) if isinstance(actions_doc, list) else type(actions_doc).__name__}"
                )
            actions = [Action(float(a), float(s)) for a, s in actions_doc]
            observations, rewards, flags, record = self._env.step(actions)
            payload = {
                "t": record.t,
                "rewards": [
                    {"local": l, "global": g, "total": tot}
                    for l, g, tot in zip(rewards.local, rewards.global_, rewards.total)
                ],
                "connected": record.connected,
                "d_global": record.d_global,
                "obs": {"t": record.t, "agents": _observation_payload(observations)},
            }
            if flags.done:
                self._stage = "ready"
                payload["type"] = "done"
                payload["outcome"] = "converged" if flags.converged else "truncated"
                payload["steps"] = record.t
            else:
                payload["type"] = "reward"
            return payload
        raise ProtocolError(f"client may not send {kind!r}")


def serve_stream(in_stream, out_stream) -> None:
    """Run one session over text streams (used for stdio and sockets)."""
    session = ServerSession()
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        response = session.handle_line(line)
        out_stream.write(response + "\n")
        out_stream.flush()
        if session.closed:
            break


def serve(transport: str = "stdio", socket_path: str | None = None) -> None:
    """Serve sessions: 'stdio' runs one session; 'socket' accepts sequentially."""
    if transport == "stdio":
        serve_stream(sys.stdin, sys.stdout)
        return
    if transport == "socket":
        if not socket_path:
            raise ValueError("socket transport needs a socket path")
        server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        server.bind(socket_path)
        server.listen(1)
        try:
            while True:
                conn, _ = server.accept()
                with conn:
                    reader = conn.makefile("r", encoding="utf-8")
                    writer = conn.makefile("w", encoding="utf-8")
                    serve_stream(reader, writer)
        finally:
            server.close()
        return
    raise ValueError(f"unknown transport {transport!r}")


class ProtocolClient:
    """Client helper over text streams; used by tests and the external controller."""

    def __init__(self, in_stream, out_stream):
        self._in = in_stream
        self._out = out_stream

    def request(self, message: dict) -> dict:
        self._out.write(encode_message(message) + "\n")
        self._out.flush()
        line = self._in.readline()
        if not line:
            raise ProtocolError("server closed the stream")
        response = decode_message(line.strip())
        if response.get("type") == "error" and response.get("fatal"):
            raise ProtocolError(f"fatal server error: {response.get('message')}")
        return response

    def hello(self) -> dict:
        response = self.request({"type": "hello", "version": PROTOCOL_VERSION})
        if response.get("type") != "hello":
            raise ProtocolError(f"handshake failed: {response}")
        return response

    def configure(self, env: dict | None = None, **scenario) -> dict:
        message = {"type": "config", "env": env or {}}
        message.update(scenario)
        response = self.request(message)
        if response.get("type") != "config":
            raise ProtocolError(f"config failed: {response}")
        return response

    def reset(self) -> dict:
        response = self.request({"type": "reset"})
        if response.get("type") != "obs":
            raise ProtocolError(f"reset failed: {response}")
        return response

    def act(self, actions) -> dict:
        response = self.request({"type": "act", "actions": actions})
        if response.get("type") not in ("reward", "done"):
            raise ProtocolError(f"act failed: {response}")
        return response

    def bye(self) -> dict:
        return self.request({"type": "bye"})
