/**
 * PPO with invalid-action masking over the bridge environment.
 *
 * Masked logits (-1e9 on invalid actions) feed both the categorical sampling
 * and the log-prob/entropy terms, so invalid actions carry zero probability
 * mass end to end.  Advantages use GAE(lambda); updates run the standard
 * clipped surrogate with a value-MSE term, minibatched over shuffled
 * rollouts, advantages normalized per minibatch.
 */
import * as tf from '@tensorflow/tfjs';

import { EnvClient, StepResult } from './envClient';
import { PpoConfig } from './hyperparams';

const MASK_FILL = -1e9;

export interface EpisodeRecord {
  episode: number;
  reward: number;
  runningAvg: number;
}

export interface TrainResult {
  episodes: EpisodeRecord[];
  maskViolations: number;
  updates: number;
}

interface Rollout {
  obs: number[][];
  masks: boolean[][];
  actions: number[];
  logProbs: number[];
  values: number[];
  rewards: number[];
  dones: boolean[];
  lastValues: number[]; // bootstrap value per env at rollout end
  envOfStep: number[];
}

function mlp(
  inputSize: number,
  hidden: number[],
  outSize: number,
  activation: 'relu' | 'tanh',
  outName: string,
): tf.LayersModel {
  const input = tf.input({ shape: [inputSize] });
  let x: tf.SymbolicTensor = input;
  for (const units of hidden) {
    x = tf.layers.dense({ units, activation }).apply(x) as tf.SymbolicTensor;
  }
  const out = tf.layers
    .dense({ units: outSize, activation: 'linear', name: outName })
    .apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: out });
}

export class MaskedPpo {
  readonly cfg: PpoConfig;
  readonly obsSize: number;
  readonly numActions: number;
  private actor: tf.LayersModel;
  private critic: tf.LayersModel;
  private optimizer: tf.Optimizer;
  maskViolations = 0;

  constructor(obsSize: number, numActions: number, cfg: PpoConfig) {
    this.cfg = cfg;
    this.obsSize = obsSize;
    this.numActions = numActions;
    // Shared feature width feeds both heads (separate weights per head).
    this.actor = mlp(
      obsSize,
      [cfg.featuresDim, ...cfg.policyLayers],
      numActions,
      cfg.activation,
      'logits',
    );
    this.critic = mlp(obsSize, [cfg.featuresDim, ...cfg.valueLayers], 1, cfg.activation, 'value');
    this.optimizer = tf.train.adam(cfg.learningRate);
  }

  private maskedLogits(obs: tf.Tensor2D, mask: tf.Tensor2D): tf.Tensor2D {
    const logits = this.actor.predict(obs) as tf.Tensor2D;
    return tf.add(tf.mul(logits, mask), tf.mul(tf.sub(1, mask), MASK_FILL)) as tf.Tensor2D;
  }

  /** Sample one action; returns [action, logProb, value]. */
  act(obs: number[], mask: boolean[]): { action: number; logProb: number; value: number } {
    return tf.tidy(() => {
      const o = tf.tensor2d([obs]);
      const m = tf.tensor2d([mask.map(Number)]);
      const logits = this.maskedLogits(o, m);
      const action = tf.multinomial(logits as tf.Tensor2D, 1).dataSync()[0];
      const logProbs = tf.logSoftmax(logits);
      const logProb = logProbs.dataSync()[action];
      const value = (this.critic.predict(o) as tf.Tensor2D).dataSync()[0];
      return { action, logProb, value };
    });
  }

  /** Greedy (argmax over valid actions) for evaluation. */
  actGreedy(obs: number[], mask: boolean[]): number {
    return tf.tidy(() => {
      const o = tf.tensor2d([obs]);
      const m = tf.tensor2d([mask.map(Number)]);
      return this.maskedLogits(o, m).argMax(1).dataSync()[0];
    });
  }

  private async collectRollout(
    envs: EnvClient[],
    states: StepResult[],
    seeds: { next: number },
    episodes: EpisodeRecord[],
    episodeReturns: number[],
    onEpisode?: (rec: EpisodeRecord) => void,
  ): Promise<Rollout> {
    const roll: Rollout = {
      obs: [], masks: [], actions: [], logProbs: [], values: [],
      rewards: [], dones: [], lastValues: [], envOfStep: [],
    };
    const perEnv = Math.ceil(this.cfg.nSteps / envs.length);
    for (let e = 0; e < envs.length; e++) {
      const env = envs[e];
      let state = states[e];
      for (let i = 0; i < perEnv; i++) {
        const { action, logProb, value } = this.act(state.obs, state.mask);
        if (!state.mask[action]) {
          // Should be unreachable: masked logits carry no probability mass.
          this.maskViolations += 1;
        }
        const next = await env.step(action);
        roll.obs.push(state.obs);
        roll.masks.push(state.mask);
        roll.actions.push(action);
        roll.logProbs.push(logProb);
        roll.values.push(value);
        roll.rewards.push(next.reward);
        roll.dones.push(next.done);
        roll.envOfStep.push(e);
        episodeReturns[e] += next.reward;
        if (next.done) {
          const n = episodes.length + 1;
          const window = episodes.slice(-49).map((r) => r.reward);
          window.push(episodeReturns[e]);
          const rec: EpisodeRecord = {
            episode: n,
            reward: episodeReturns[e],
            runningAvg: window.reduce((a, b) => a + b, 0) / window.length,
          };
          episodes.push(rec);
          onEpisode?.(rec);
          episodeReturns[e] = 0;
          state = await env.reset(seeds.next++);
        } else {
          state = next;
        }
      }
      states[e] = state;
      roll.lastValues.push(
        roll.dones[roll.dones.length - 1] ? 0 : this.valueOf(state.obs),
      );
    }
    return roll;
  }

  private valueOf(obs: number[]): number {
    return tf.tidy(() => (this.critic.predict(tf.tensor2d([obs])) as tf.Tensor2D).dataSync()[0]);
  }

  /** GAE over each env's contiguous segment. */
  private advantages(roll: Rollout): { adv: Float32Array; ret: Float32Array } {
    const n = roll.rewards.length;
    const adv = new Float32Array(n);
    const ret = new Float32Array(n);
    const { gamma, gaeLambda } = this.cfg;
    let segEnd = n - 1;
    for (let e = roll.lastValues.length - 1; e >= 0; e--) {
      let segStart = segEnd;
      while (segStart > 0 && roll.envOfStep[segStart - 1] === e) segStart--;
      let lastGae = 0;
      let nextValue = roll.lastValues[e];
      for (let t = segEnd; t >= segStart; t--) {
        const nonTerminal = roll.dones[t] ? 0 : 1;
        const delta = roll.rewards[t] + gamma * nextValue * nonTerminal - roll.values[t];
        lastGae = delta + gamma * gaeLambda * nonTerminal * lastGae;
        adv[t] = lastGae;
        ret[t] = adv[t] + roll.values[t];
        nextValue = roll.values[t];
      }
      segEnd = segStart - 1;
    }
    return { adv, ret };
  }

  private updateOnce(roll: Rollout): void {
    const { adv, ret } = this.advantages(roll);
    const n = roll.actions.length;
    const indices = Array.from({ length: n }, (_, i) => i);
    const { batchSize, nEpochs, clipRange, vfCoef, entCoef } = this.cfg;
    for (let epoch = 0; epoch < nEpochs; epoch++) {
      shuffle(indices);
      for (let start = 0; start < n; start += batchSize) {
        const batch = indices.slice(start, start + batchSize);
        if (batch.length < 2) continue;
        const obsB = tf.tensor2d(batch.map((i) => roll.obs[i]));
        const maskB = tf.tensor2d(batch.map((i) => roll.masks[i].map(Number)));
        const actB = tf.tensor1d(batch.map((i) => roll.actions[i]), 'int32');
        const oldLogProbB = tf.tensor1d(batch.map((i) => roll.logProbs[i]));
        const advRaw = batch.map((i) => adv[i]);
        const mean = advRaw.reduce((a, b) => a + b, 0) / advRaw.length;
        const std =
          Math.sqrt(advRaw.reduce((a, b) => a + (b - mean) ** 2, 0) / advRaw.length) + 1e-8;
        const advB = tf.tensor1d(advRaw.map((a) => (a - mean) / std));
        const retB = tf.tensor1d(batch.map((i) => ret[i]));

        // minimize() differentiates w.r.t. every trainable variable in the
        // engine, which is exactly the actor + critic weights here.
        this.optimizer.minimize(() => {
          const logits = this.maskedLogits(obsB as tf.Tensor2D, maskB as tf.Tensor2D);
          const logProbs = tf.logSoftmax(logits);
          const actionLogProb = tf.sum(
            tf.mul(tf.oneHot(actB, this.numActions), logProbs),
            1,
          );
          const ratio = tf.exp(tf.sub(actionLogProb, oldLogProbB));
          const clipped = tf.clipByValue(ratio, 1 - clipRange, 1 + clipRange);
          const policyLoss = tf.neg(
            tf.mean(tf.minimum(tf.mul(ratio, advB), tf.mul(clipped, advB))),
          );
          const values = tf.squeeze(this.critic.predict(obsB) as tf.Tensor2D, [1]);
          const valueLoss = tf.mean(tf.square(tf.sub(retB, values)));
          const probs = tf.softmax(logits);
          const entropy = tf.neg(tf.mean(tf.sum(tf.mul(probs, logProbs), 1)));
          return tf.add(
            tf.add(policyLoss, tf.mul(valueLoss, vfCoef)),
            tf.mul(entropy, -entCoef),
          ) as tf.Scalar;
        }, false);

        tf.dispose([obsB, maskB, actB, oldLogProbB, advB, retB]);
      }
    }
  }

  /** Train until `totalEpisodes` episodes have finished across all envs. */
  async train(
    envs: EnvClient[],
    totalEpisodes: number,
    onEpisode?: (rec: EpisodeRecord) => void,
  ): Promise<TrainResult> {
    const seeds = { next: 1 };
    const states: StepResult[] = [];
    for (const env of envs) states.push(await env.reset(seeds.next++));
    const episodes: EpisodeRecord[] = [];
    const episodeReturns = envs.map(() => 0);
    let updates = 0;
    const capped = (rec: EpisodeRecord) => {
      if (rec.episode <= totalEpisodes) onEpisode?.(rec);
    };
    while (episodes.length < totalEpisodes) {
      const roll = await this.collectRollout(
        envs, states, seeds, episodes, episodeReturns, capped,
      );
      this.updateOnce(roll);
      updates += 1;
    }
    return { episodes: episodes.slice(0, totalEpisodes), maskViolations: this.maskViolations, updates };
  }

  /** JSON-serializable checkpoint (weights + dimensions). */
  exportCheckpoint(): Record<string, unknown> {
    const dump = (model: tf.LayersModel) =>
      model.getWeights().map((w) => ({ shape: w.shape, data: Array.from(w.dataSync()) }));
    return {
      obsSize: this.obsSize,
      numActions: this.numActions,
      config: this.cfg,
      actor: dump(this.actor),
      critic: dump(this.critic),
    };
  }

  importCheckpoint(checkpoint: Record<string, unknown>): void {
    const load = (model: tf.LayersModel, saved: Array<{ shape: number[]; data: number[] }>) => {
      model.setWeights(saved.map((w) => tf.tensor(w.data, w.shape)));
    };
    load(this.actor, checkpoint.actor as Array<{ shape: number[]; data: number[] }>);
    load(this.critic, checkpoint.critic as Array<{ shape: number[]; data: number[] }>);
  }
}

function shuffle(arr: number[]): void {
  for (let i = arr.length - 1; i > 0; i--) {
    const j = Math.floor(Math.random() * (i + 1));
    [arr[i], arr[j]] = [arr[j], arr[i]];
  }
}
