/**
 * Subprocess bridge to the toolkit's JSON-lines RPC verb.
 *
 * One request object per line on stdin, one response per line on stdout,
 * answered strictly in order. Errors raised by the core surface here as
 * {@link SlamkitError} carrying the original message; the child process
 * survives bad requests.
 */

import { type ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

export class SlamkitError extends Error {
  /** Exception class name reported by the core. */
  readonly kind: string;

  constructor(message: string, kind: string) {
    super(message);
    this.name = "SlamkitError";
    this.kind = kind;
  }
}

export interface BridgeOptions {
  /** Python interpreter used to launch the core (default "python3"). */
  python?: string;
  /** Extra arguments placed before `-m slamkit.cli rpc`. */
  pythonArgs?: string[];
}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

export class Bridge {
  private child: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private pending: Pending[] = [];
  private closed = false;
  private stderrTail = "";

  constructor(options: BridgeOptions = {}) {
    const python = options.python ?? "python3";
    const args = [...(options.pythonArgs ?? []), "-m", "slamkit.cli", "rpc"];
    this.child = spawn(python, args, { stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString()).slice(-4000);
    });
    this.child.on("exit", (code) => {
      this.closed = true;
      const err = new SlamkitError(
        `core process exited (code ${code}): ${this.stderrTail}`,
        "ProcessExit",
      );
      for (const p of this.pending.splice(0)) p.reject(err);
    });
    this.child.on("error", (e) => {
      this.closed = true;
      const err = new SlamkitError(`failed to launch core: ${e.message}`, "SpawnError");
      for (const p of this.pending.splice(0)) p.reject(err);
    });
  }

  private onLine(line: string): void {
    const next = this.pending.shift();
    if (!next) return;
    let parsed: { ok: boolean; result?: unknown; error?: string; kind?: string };
    try {
      parsed = JSON.parse(line);
    } catch (e) {
      next.reject(new SlamkitError(`unparseable response: ${line}`, "BadResponse"));
      return;
    }
    if (parsed.ok) {
      next.resolve(parsed.result);
    } else {
      next.reject(new SlamkitError(parsed.error ?? "unknown error", parsed.kind ?? "Error"));
    }
  }

  call<T = unknown>(op: string, params: Record<string, unknown> = {}): Promise<T> {
    if (this.closed) {
      return Promise.reject(new SlamkitError("bridge is closed", "Closed"));
    }
    return new Promise<T>((resolve, reject) => {
      this.pending.push({ resolve: resolve as (v: unknown) => void, reject });
      this.child.stdin.write(JSON.stringify({ op, ...params }) + "\n");
    });
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    this.child.stdin.end();
    await new Promise<void>((resolve) => {
      this.child.once("exit", () => resolve());
      setTimeout(() => {
        this.child.kill();
        resolve();
      }, 2000).unref();
    });
  }
}
