/** Spawns `msdash serve-bridge` as a child process for tests. */
import { ChildProcess, execFileSync, spawn } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';

export interface ServerHandle {
  proc: ChildProcess;
  host: string;
  port: number;
  configPath: string;
  stop(): void;
}

export function writeConfig(yaml: string): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'msdash-frontend-'));
  const p = path.join(dir, 'env.yaml');
  fs.writeFileSync(p, yaml);
  return p;
}

export async function startServer(configYaml: string, extraArgs: string[] = []): Promise<ServerHandle> {
  const configPath = writeConfig(configYaml);
  const port = 40_000 + Math.floor(Math.random() * 20_000);
  const proc = spawn(
    'python3',
    ['-m', 'msdash.cli', 'serve-bridge', '--config', configPath,
     '--port', String(port), ...extraArgs],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  let stderr = '';
  proc.stderr?.on('data', (d) => { stderr += String(d); });
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error(`server did not start: ${stderr}`)), 20_000,
    );
    proc.stdout?.on('data', (chunk) => {
      if (String(chunk).includes('bridge listening')) {
        clearTimeout(timer);
        resolve();
      }
    });
    proc.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}): ${stderr}`));
    });
  });
  return {
    proc,
    host: '127.0.0.1',
    port,
    configPath,
    stop: () => proc.kill('SIGTERM'),
  };
}

export function goldenTranscript(configPath: string, seed: number): {
  reset: { obs: number[]; mask: boolean[] };
  actions: number[];
  steps: Array<{ obs: number[]; mask: boolean[]; reward: number; done: boolean }>;
} {
  const out = execFileSync(
    'python3',
    [path.join(__dirname, 'transcript_helper.py'), configPath, String(seed)],
    { maxBuffer: 64 * 1024 * 1024 },
  );
  return JSON.parse(String(out));
}
