import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { ClientMessage, ServerMessage } from "./messages.js";

export class BridgeError extends Error {}

/**
 * One line of JSON per message over a child process's stdio. The protocol is
 * strict request/response, so at most one request is ever in flight.
 */
export class StdioTransport {
  private child: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private pending: Array<{
    resolve: (message: ServerMessage) => void;
    reject: (error: Error) => void;
  }> = [];
  private stderrTail: string[] = [];
  private exited = false;

  constructor(command: string[], cwd?: string) {
    const [program, ...args] = command;
    this.child = spawn(program, args, { cwd, stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail.push(chunk.toString());
      if (this.stderrTail.length > 50) this.stderrTail.shift();
    });
    this.child.on("exit", () => {
      this.exited = true;
      const diagnostics = this.stderrTail.join("").trim();
      for (const waiter of this.pending.splice(0)) {
        waiter.reject(
          new BridgeError(
            `environment process exited unexpectedly${diagnostics ? `:\n${diagnostics}` : ""}`,
          ),
        );
      }
    });
  }

  private onLine(line: string): void {
    const waiter = this.pending.shift();
    if (!waiter) return; // unsolicited output; protocol never produces this
    try {
      waiter.resolve(JSON.parse(line) as ServerMessage);
    } catch (error) {
      waiter.reject(new BridgeError(`unparseable server line: ${line}`));
    }
  }

  request(message: ClientMessage): Promise<ServerMessage> {
    if (this.exited) {
      return Promise.reject(new BridgeError("environment process is not running"));
    }
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.child.stdin.write(JSON.stringify(message) + "\n");
    });
  }

  get alive(): boolean {
    return !this.exited;
  }

  async close(): Promise<void> {
    if (this.exited) return;
    try {
      await this.request({ type: "bye" });
    } catch {
      // the process may already be gone; killing below is enough
    }
    this.child.kill();
    await new Promise<void>((resolve) => {
      if (this.exited) return resolve();
      this.child.once("exit", () => resolve());
    });
  }
}
