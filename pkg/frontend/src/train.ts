/**
 * Masked-PPO trainer CLI.
 *
 * The bridge server must already be listening (e.g.
 * `msdash serve-bridge --port 5555`).  Usage:
 *
 *   node dist/train.js --port 5555 [--host 127.0.0.1] [--config joint|level|smoke]
 *                      [--episodes 200] [--envs 1] [--out runs/joint]
 *
 * --config also accepts a path to a JSON file with the PpoConfig fields
 * (see configs/*.json).  Writes checkpoint.json (weights) and curve.jsonl
 * (per-episode reward and 50-episode running average) into --out.
 */
import * as fs from 'fs';
import * as path from 'path';

import { EnvClient } from './envClient';
import { CONFIGS, PpoConfig } from './hyperparams';
import { MaskedPpo } from './maskedPpo';

function loadConfig(nameOrPath: string): { name: string; cfg: PpoConfig } {
  if (nameOrPath in CONFIGS) return { name: nameOrPath, cfg: CONFIGS[nameOrPath] };
  if (fs.existsSync(nameOrPath)) {
    const cfg = JSON.parse(fs.readFileSync(nameOrPath, 'utf-8')) as PpoConfig;
    return { name: path.basename(nameOrPath, '.json'), cfg };
  }
  throw new Error(`unknown config ${nameOrPath}; names: ${Object.keys(CONFIGS)} or a JSON path`);
}

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--')) throw new Error(`unexpected argument ${argv[i]}`);
    out[argv[i].slice(2)] = argv[i + 1];
  }
  return out;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const host = args.host ?? '127.0.0.1';
  const port = Number(args.port ?? 5555);
  const { name: configName, cfg } = loadConfig(args.config ?? 'joint');
  const episodes = Number(args.episodes ?? 200);
  const nEnvs = Number(args.envs ?? cfg.nEnvs ?? 1);
  const outDir = args.out ?? path.join('runs', configName);

  const envs: EnvClient[] = [];
  for (let i = 0; i < nEnvs; i++) envs.push(await EnvClient.connect(host, port));
  const spec = envs[0].spec;
  console.log(
    `connected to ${host}:${port}: obs ${spec.obs_size}, ` +
      `${spec.action_space} action space of ${spec.action_space_size}, ${nEnvs} env(s)`,
  );

  fs.mkdirSync(outDir, { recursive: true });
  const curvePath = path.join(outDir, 'curve.jsonl');
  const curve = fs.createWriteStream(curvePath);

  const agent = new MaskedPpo(spec.obs_size, spec.action_space_size, { ...cfg, nEnvs });
  const t0 = Date.now();
  const result = await agent.train(envs, episodes, (rec) => {
    curve.write(JSON.stringify(rec) + '\n');
    if (rec.episode % 10 === 0) {
      console.log(
        `episode ${rec.episode}/${episodes}  reward ${rec.reward.toFixed(1)}  ` +
          `avg50 ${rec.runningAvg.toFixed(1)}`,
      );
    }
  });
  curve.end();

  const ckptPath = path.join(outDir, 'checkpoint.json');
  fs.writeFileSync(ckptPath, JSON.stringify(agent.exportCheckpoint()));
  console.log(
    `done: ${result.episodes.length} episodes, ${result.updates} updates, ` +
      `${result.maskViolations} mask violations, ${((Date.now() - t0) / 1000).toFixed(0)}s`,
  );
  console.log(`wrote ${ckptPath} and ${curvePath}`);

  for (const env of envs) await env.close();
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
