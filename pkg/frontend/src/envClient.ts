/** Typed environment handle over one bridge connection. */
import { ErrorReply, FramedSocket, HandshakeReply, ObsReply, Reply } from './protocol';

export interface StepResult {
  obs: number[];
  mask: boolean[];
  reward: number;
  done: boolean;
  info: Record<string, unknown>;
}

export class EnvClient {
  private socket: FramedSocket;
  private nextId = 0;
  readonly spec: HandshakeReply;

  private constructor(socket: FramedSocket, spec: HandshakeReply) {
    this.socket = socket;
    this.spec = spec;
  }

  static async connect(host: string, port: number): Promise<EnvClient> {
    const socket = await FramedSocket.connect(host, port);
    const reply = await socket.request({ id: 0, kind: 'handshake' });
    if (reply.kind !== 'handshake_reply') {
      throw new Error(`handshake failed: ${JSON.stringify(reply)}`);
    }
    const client = new EnvClient(socket, reply);
    client.nextId = 1;
    return client;
  }

  private async call(kind: string, fields: Record<string, unknown> = {}): Promise<Reply> {
    return this.socket.request({ id: this.nextId++, kind, ...fields });
  }

  async reset(seed: number): Promise<StepResult> {
    const reply = await this.call('reset', { seed });
    return asStep(reply);
  }

  async step(action: number): Promise<StepResult> {
    const reply = await this.call('step', { action });
    return asStep(reply);
  }

  /** Like step(), but surfaces protocol 'error' replies instead of throwing. */
  async stepRaw(action: number): Promise<StepResult | ErrorReply> {
    const reply = await this.call('step', { action });
    if (reply.kind === 'error') return reply;
    return asStep(reply);
  }

  async close(): Promise<void> {
    try {
      await this.call('close');
    } finally {
      this.socket.destroy();
    }
  }
}

function asStep(reply: Reply): StepResult {
  if (reply.kind !== 'obs_reply') {
    throw new Error(`expected obs_reply, got ${JSON.stringify(reply).slice(0, 200)}`);
  }
  const r = reply as ObsReply;
  return { obs: r.obs, mask: r.mask, reward: r.reward, done: r.done, info: r.info };
}
