/**
 * HouseworldClient — NDJSON/TCP client session for the evaluation
 * service. One client instance wraps one connection, which hosts at
 * most one episode (or one report request).
 */

import net from 'node:net';

import {
  type ClientMessage,
  type EpisodeResult,
  type MetricsReport,
  type ServerMessage,
  PROTOCOL_VERSION,
} from './protocol';
import { type Agent } from './agents';

export class ProtocolError extends Error {}

export interface ConnectOptions {
  host: string;
  port: number;
  /** Per-message receive timeout in milliseconds (default 30000). */
  timeoutMs?: number;
}

export class HouseworldClient {
  private readonly socket: net.Socket;
  private readonly timeoutMs: number;
  private buffer = '';
  private inbox: ServerMessage[] = [];
  private waiters: Array<(msg: ServerMessage | null) => void> = [];
  private finished = false;
  private failure: Error | null = null;

  private constructor(socket: net.Socket, timeoutMs: number) {
    this.socket = socket;
    this.timeoutMs = timeoutMs;
    socket.setEncoding('utf-8');
    socket.on('data', (chunk: string) => this.onData(chunk));
    socket.on('error', (err: Error) => this.fail(err));
    socket.on('close', () => this.fail(null));
  }

  static connect(options: ConnectOptions): Promise<HouseworldClient> {
    const timeoutMs = options.timeoutMs ?? 30_000;
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(
        { host: options.host, port: options.port },
        () => {
          socket.removeListener('error', reject);
          resolve(new HouseworldClient(socket, timeoutMs));
        },
      );
      socket.once('error', reject);
    });
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let eol: number;
    while ((eol = this.buffer.indexOf('\n')) >= 0) {
      const line = this.buffer.slice(0, eol);
      this.buffer = this.buffer.slice(eol + 1);
      if (!line.trim()) {
        continue;
      }
      let msg: ServerMessage;
      try {
        msg = JSON.parse(line) as ServerMessage;
      } catch {
        this.fail(new ProtocolError(`unparseable server line: ${line}`));
        return;
      }
      const waiter = this.waiters.shift();
      if (waiter) {
        waiter(msg);
      } else {
        this.inbox.push(msg);
      }
    }
  }

  private fail(err: Error | null): void {
    if (this.finished) {
      return;
    }
    this.finished = true;
    this.failure = err;
    for (const waiter of this.waiters.splice(0)) {
      waiter(null);
    }
  }

  send(message: ClientMessage): void {
    this.socket.write(JSON.stringify(message) + '\n');
  }

  /** Next server message, or null once the connection is gone. */
  next(): Promise<ServerMessage | null> {
    const queued = this.inbox.shift();
    if (queued !== undefined) {
      return Promise.resolve(queued);
    }
    if (this.finished) {
      if (this.failure) {
        return Promise.reject(this.failure);
      }
      return Promise.resolve(null);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const i = this.waiters.indexOf(settle);
        if (i >= 0) {
          this.waiters.splice(i, 1);
        }
        reject(new ProtocolError(`no server message within ${this.timeoutMs}ms`));
      }, this.timeoutMs);
      const settle = (msg: ServerMessage | null) => {
        clearTimeout(timer);
        if (msg === null && this.failure) {
          reject(this.failure);
        } else {
          resolve(msg);
        }
      };
      this.waiters.push(settle);
    });
  }

  close(): void {
    this.socket.destroy();
    this.fail(null);
  }

  /**
   * Drive one full episode: handshake, then hand every user-facing turn
   * (including feedback) to the agent and forward its decision text.
   */
  async runEpisode(
    taskId: string,
    agent: Agent,
    seed = 0,
  ): Promise<EpisodeResult> {
    this.send({
      kind: 'session_init',
      task_id: taskId,
      seed,
      version: PROTOCOL_VERSION,
    });
    const ack = await this.next();
    if (ack === null || ack.kind === 'error') {
      throw new ProtocolError(
        ack === null ? 'connection closed before ack' : ack.text,
      );
    }
    if (ack.kind !== 'ack' || ack.version !== PROTOCOL_VERSION) {
      throw new ProtocolError(`unexpected handshake reply: ${JSON.stringify(ack)}`);
    }
    for (;;) {
      const msg = await this.next();
      if (msg === null) {
        throw new ProtocolError('connection closed mid-episode');
      }
      switch (msg.kind) {
        case 'episode_end':
          return msg.result;
        case 'error':
          throw new ProtocolError(msg.text);
        case 'feedback': {
          const text = await agent({ text: msg.text, isFeedback: true });
          this.send({ kind: 'decision', text });
          break;
        }
        case 'turn':
          if (msg.role === 'user') {
            const text = await agent({ text: msg.text, isFeedback: false });
            this.send({ kind: 'decision', text });
          }
          break;
        default:
          throw new ProtocolError(`unexpected message: ${JSON.stringify(msg)}`);
      }
    }
  }

  /** Aggregate metrics of every episode the service has finished. */
  static async fetchReport(options: ConnectOptions): Promise<MetricsReport> {
    const client = await HouseworldClient.connect(options);
    try {
      client.send({ kind: 'report' });
      const reply = await client.next();
      if (reply === null || reply.kind !== 'report') {
        throw new ProtocolError(
          `expected report, got ${reply === null ? 'EOF' : JSON.stringify(reply)}`,
        );
      }
      return reply.result;
    } finally {
      client.close();
    }
  }
}

/** Convenience: connect, run one episode, disconnect. */
export async function runEpisode(
  options: ConnectOptions,
  taskId: string,
  agent: Agent,
  seed = 0,
): Promise<EpisodeResult> {
  const client = await HouseworldClient.connect(options);
  try {
    return await client.runEpisode(taskId, agent, seed);
  } finally {
    client.close();
  }
}
