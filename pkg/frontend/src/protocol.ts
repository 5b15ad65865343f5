/**
 * Framed-JSON client for the msdash bridge socket (see ../../PROTOCOL.md).
 * Every frame is a 4-byte big-endian length followed by UTF-8 JSON.
 */
import * as net from 'net';

export interface ObsReply {
  id: number;
  kind: 'obs_reply';
  obs: number[];
  mask: boolean[];
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export interface HandshakeReply {
  id: number;
  kind: 'handshake_reply';
  obs_size: number;
  action_space: 'joint' | 'level';
  action_space_size: number;
  num_paths: number;
  window: number;
  num_levels: number;
}

export interface ErrorReply {
  id?: number;
  kind: 'error';
  message: string;
}

export type Reply = ObsReply | HandshakeReply | ErrorReply | { id: number; kind: 'closed' };

export class FramedSocket {
  private socket: net.Socket;
  private buffer = Buffer.alloc(0);
  private waiters: Array<{ resolve: (r: Reply) => void; reject: (e: Error) => void }> = [];
  private closed = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on('data', (chunk: string | Buffer) =>
      this.onData(typeof chunk === 'string' ? Buffer.from(chunk, 'utf-8') : chunk),
    );
    socket.on('error', (err) => this.failAll(err));
    socket.on('close', () => this.failAll(new Error('socket closed')));
  }

  static connect(host: string, port: number, timeoutMs = 10_000): Promise<FramedSocket> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () => {
        socket.setTimeout(0);
        resolve(new FramedSocket(socket));
      });
      socket.setTimeout(timeoutMs, () => {
        socket.destroy();
        reject(new Error(`connect timeout to ${host}:${port}`));
      });
      socket.once('error', reject);
    });
  }

  private onData(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    while (this.buffer.length >= 4) {
      const length = this.buffer.readUInt32BE(0);
      if (this.buffer.length < 4 + length) return;
      const payload = this.buffer.subarray(4, 4 + length).toString('utf-8');
      this.buffer = this.buffer.subarray(4 + length);
      const waiter = this.waiters.shift();
      if (waiter) waiter.resolve(JSON.parse(payload) as Reply);
    }
  }

  private failAll(err: Error): void {
    if (this.closed) return;
    this.closed = true;
    for (const w of this.waiters.splice(0)) w.reject(err);
  }

  /** Send one message and await exactly one reply (the protocol is strict request/reply). */
  request(message: Record<string, unknown>): Promise<Reply> {
    const payload = Buffer.from(JSON.stringify(message), 'utf-8');
    const frame = Buffer.alloc(4 + payload.length);
    frame.writeUInt32BE(payload.length, 0);
    payload.copy(frame, 4);
    return new Promise((resolve, reject) => {
      this.waiters.push({ resolve, reject });
      this.socket.write(frame, (err) => {
        if (err) reject(err);
      });
    });
  }

  destroy(): void {
    this.closed = true;
    this.socket.destroy();
  }
}
