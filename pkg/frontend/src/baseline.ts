/** Seeded uniform-over-valid-actions baseline, measured over the bridge. */
import { EnvClient } from './envClient';

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomValidAction(mask: boolean[], rand: () => number): number {
  const valid: number[] = [];
  for (let i = 0; i < mask.length; i++) if (mask[i]) valid.push(i);
  if (valid.length === 0) throw new Error('mask has no valid action');
  return valid[Math.floor(rand() * valid.length)];
}

export async function measureRandomBaseline(
  env: EnvClient,
  episodes: number,
  seedBase = 900_000,
): Promise<{ mean: number; rewards: number[] }> {
  const rewards: number[] = [];
  for (let ep = 0; ep < episodes; ep++) {
    const rand = mulberry32(seedBase + ep);
    let state = await env.reset(seedBase + ep);
    let total = 0;
    while (true) {
      const action = randomValidAction(state.mask, rand);
      state = await env.step(action);
      total += state.reward;
      if (state.done) break;
    }
    rewards.push(total);
  }
  return { mean: rewards.reduce((a, b) => a + b, 0) / rewards.length, rewards };
}
