/** Training configurations for the two action spaces. */

export interface PpoConfig {
  learningRate: number;
  /** transitions collected per update */
  nSteps: number;
  batchSize: number;
  nEpochs: number;
  gamma: number;
  gaeLambda: number;
  clipRange: number;
  vfCoef: number;
  entCoef: number;
  featuresDim: number;
  activation: 'relu' | 'tanh';
  /** hidden layers of the policy head, after the shared feature layer */
  policyLayers: number[];
  /** hidden layers of the value head */
  valueLayers: number[];
  /** parallel bridge connections to collect from */
  nEnvs: number;
}

/** Tuned values for the joint (chunk index + level) action space. */
export const JOINT_CONFIG: PpoConfig = {
  learningRate: 7.61e-5,
  nSteps: 2048,
  batchSize: 530,
  nEpochs: 10,
  gamma: 1.0,
  gaeLambda: 0.95,
  clipRange: 0.2,
  vfCoef: 0.286954,
  entCoef: 0,
  featuresDim: 512,
  activation: 'tanh',
  policyLayers: [256, 256, 256],
  valueLayers: [256, 256, 256, 256],
  nEnvs: 1,
};

/** Tuned values for the level-only space (greedy chunk scheduling). */
export const LEVEL_CONFIG: PpoConfig = {
  learningRate: 1.25e-4,
  nSteps: 2048,
  batchSize: 411,
  nEpochs: 10,
  gamma: 0.99,
  gaeLambda: 0.9,
  clipRange: 0.3,
  vfCoef: 0.317708,
  entCoef: 0,
  featuresDim: 256,
  activation: 'relu',
  policyLayers: [512],
  valueLayers: [512, 512, 512],
  nEnvs: 1,
};

/** Small/fast settings for the CPU smoke run (outcome-checked, not tuned). */
export const SMOKE_CONFIG: PpoConfig = {
  learningRate: 1e-3,
  nSteps: 600,
  batchSize: 128,
  nEpochs: 4,
  gamma: 0.99,
  gaeLambda: 0.95,
  clipRange: 0.2,
  vfCoef: 0.5,
  entCoef: 0,
  featuresDim: 64,
  activation: 'tanh',
  policyLayers: [64],
  valueLayers: [64],
  nEnvs: 1,
};

export const CONFIGS: Record<string, PpoConfig> = {
  joint: JOINT_CONFIG,
  level: LEVEL_CONFIG,
  smoke: SMOKE_CONFIG,
};
