import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { EnvClient } from '../src/envClient';
import { goldenTranscript, ServerHandle, startServer } from './serverHarness';

// Two constant traces per path so the deterministic 80/20 split keeps one.
const CONFIG = `
num_chunks: 60
rtt: {kind: constant, low_s: 0.0}
paths:
  - source: {kind: constant, kbps: [1800, 1800]}
  - source: {kind: constant, kbps: [600, 600]}
`;

describe('bridge transparency', () => {
  let server: ServerHandle;

  beforeAll(async () => {
    server = await startServer(CONFIG);
  }, 30_000);

  afterAll(() => server?.stop());

  it('reports the frozen space sizes in the handshake', async () => {
    const env = await EnvClient.connect(server.host, server.port);
    expect(env.spec.obs_size).toBe(83);
    expect(env.spec.action_space_size).toBe(49);
    expect(env.spec.action_space).toBe('joint');
    expect(env.spec.window).toBe(7);
    expect(env.spec.num_levels).toBe(7);
    await env.close();
  });

  it('replays a scripted 60-action episode identically to direct calls', async () => {
    const seed = 2024;
    const golden = goldenTranscript(server.configPath, seed);
    expect(golden.actions.length).toBe(60);

    const env = await EnvClient.connect(server.host, server.port);
    const reset = await env.reset(seed);
    expect(reset.obs).toStrictEqual(golden.reset.obs);
    expect(reset.mask).toStrictEqual(golden.reset.mask);

    for (let i = 0; i < golden.actions.length; i++) {
      const got = await env.step(golden.actions[i]);
      const want = golden.steps[i];
      expect(got.reward).toBe(want.reward); // exact float equality
      expect(got.done).toBe(want.done);
      expect(got.obs).toStrictEqual(want.obs);
      expect(got.mask).toStrictEqual(want.mask);
    }
    await env.close();
  }, 60_000);

  it('rejects masked actions with an error reply and keeps the session', async () => {
    const env = await EnvClient.connect(server.host, server.port);
    const first = await env.reset(7);
    const action = first.mask.findIndex((b) => b);
    await env.step(action);
    const err = await env.stepRaw(action); // same chunk again: masked
    expect((err as { kind: string }).kind).toBe('error');
    const again = await env.reset(8); // session still usable
    expect(again.obs.length).toBe(83);
    await env.close();
  });

  it('runs independent parallel sessions', async () => {
    const a = await EnvClient.connect(server.host, server.port);
    const b = await EnvClient.connect(server.host, server.port);
    const ra = await a.reset(3);
    const rb = await b.reset(3);
    expect(ra.obs).toStrictEqual(rb.obs);
    const action = ra.mask.findIndex((m) => m);
    const sa = await a.step(action);
    const sb = await b.step(action);
    expect(sa.obs).toStrictEqual(sb.obs);
    expect(sa.reward).toBe(sb.reward);
    await a.close();
    await b.close();
  });
});
