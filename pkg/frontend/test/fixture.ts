/**
 * Test fixture: builds a scene/task/plan workspace with the `houseworld`
 * CLI and hosts the evaluation service as a child process. The SDK side
 * only ever touches the exported files and the wire protocol.
 */

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, readdirSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import type { ActionDict } from '../src/index';

const CLI = process.env.HOUSEWORLD_CLI ?? 'houseworld';

export interface TaskRecord {
  id: string;
  scene_id: string;
  sub_task: string;
  text: string;
}

export interface PlanRecord {
  key: { task_id: string; actions: ActionDict[] };
  full: ActionDict[];
}

export interface Workspace {
  dir: string;
  scenesDir: string;
  tasksFile: string;
  tasks: TaskRecord[];
  /** task id -> full planned action list */
  plans: Map<string, ActionDict[]>;
  /** scene id -> (object id -> class name) */
  classes: Map<string, Map<string, string>>;
  /** aggregate of the in-process oracle, per `houseworld evaluate` */
  expectedReport: unknown;
}

export function runCli(args: string[]): string {
  const out = spawnSync(CLI, args, { encoding: 'utf-8' });
  if (out.status !== 0) {
    throw new Error(
      `${CLI} ${args.join(' ')} exited ${out.status}:\n${out.stderr}`,
    );
  }
  return out.stdout;
}

function readLines(path: string): string[] {
  return readFileSync(path, 'utf-8')
    .split('\n')
    .filter((line) => line.trim().length > 0);
}

export function buildWorkspace(seed = 7): Workspace {
  const dir = mkdtempSync(join(tmpdir(), 'houseworld-sdk-'));
  const scenesDir = join(dir, 'scenes');
  const tasksFile = join(dir, 'tasks.jsonl');
  const plansFile = join(dir, 'plans.jsonl');
  const reportFile = join(dir, 'expected.json');

  runCli(['--seed', String(seed), 'gen-scenes', '--out', scenesDir,
          '--count', '2']);
  const mix = [
    'exposedsearch=4', 'enclosedsearch=3', 'exposedgrasp=3',
    'enclosedgrasp=2', 'exp2exp=2', 'enc2exp=2', 'sequential=1',
  ].join(',');
  runCli(['--seed', String(seed), 'gen-tasks', '--scenes', scenesDir,
          '--mix', mix, '--out', tasksFile]);
  runCli(['--seed', String(seed), 'plan', '--scenes', scenesDir,
          '--tasks', tasksFile, '--out', plansFile, '--n-detours', '0']);
  runCli(['--seed', String(seed), 'evaluate', '--scenes', scenesDir,
          '--tasks', tasksFile, '--agent', 'oracle',
          '--report', reportFile]);

  const tasks = readLines(tasksFile).map(
    (line) => JSON.parse(line) as TaskRecord,
  );
  const plans = new Map<string, ActionDict[]>();
  for (const line of readLines(plansFile)) {
    const plan = JSON.parse(line) as PlanRecord;
    plans.set(plan.key.task_id, plan.full);
  }

  const classes = new Map<string, Map<string, string>>();
  for (const name of readdirSync(scenesDir)) {
    if (!name.endsWith('.json')) {
      continue;
    }
    const doc = JSON.parse(readFileSync(join(scenesDir, name), 'utf-8')) as {
      id: string;
      objects: Array<{ id: string; class_name: string }>;
    };
    classes.set(
      doc.id,
      new Map(doc.objects.map((o) => [o.id, o.class_name])),
    );
  }

  const expectedReport = (
    JSON.parse(readFileSync(reportFile, 'utf-8')) as { report: unknown }
  ).report;
  return { dir, scenesDir, tasksFile, tasks, plans, classes, expectedReport };
}

export function dropWorkspace(ws: Workspace): void {
  rmSync(ws.dir, { recursive: true, force: true });
}

export interface Service {
  child: ChildProcess;
  host: string;
  port: number;
}

export function startService(ws: Workspace): Promise<Service> {
  const child = spawn(
    CLI,
    ['serve', '--scenes', ws.scenesDir, '--tasks', ws.tasksFile,
     '--port', '0'],
    { stdio: ['ignore', 'pipe', 'pipe'] },
  );
  return new Promise((resolve, reject) => {
    let banner = '';
    const timer = setTimeout(
      () => reject(new Error(`service never announced a port:\n${banner}`)),
      30_000,
    );
    child.stdout!.setEncoding('utf-8');
    child.stdout!.on('data', (chunk: string) => {
      banner += chunk;
      const m = banner.match(/listening on ([\d.]+):(\d+)/);
      if (m) {
        clearTimeout(timer);
        resolve({ child, host: m[1], port: Number(m[2]) });
      }
    });
    child.on('error', (err) => {
      clearTimeout(timer);
      reject(err);
    });
    child.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited early (${code}):\n${banner}`));
    });
  });
}

export function stopService(service: Service): void {
  service.child.removeAllListeners('exit');
  service.child.kill('SIGTERM');
}
