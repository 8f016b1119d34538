"""Command-line entry point tying the pipeline together.

Subcommands compose the library modules; every random choice descends
from the global --seed, so rerunning a command reproduces its output
byte-for-byte. Usage errors exit 2; data errors exit 1 with
diagnostics; success exits 0. Progress goes to standard error.
"""

import argparse
import json
import logging
import os
import sys

from .errors import HouseworldError, ParseError
from .harness import Limits, evaluate_agent, make_agent
from .metrics import aggregate, filter_trajectories, flat_table
from .planner import SearchPolicy, derive_key_actions, insert_search_process
from .scene import SceneSpec, generate_scene, load_scene, save_scene
from .seeds import derive_seed
from .server import ServerConfig, serve_forever
from .tasks import SUB_TASKS, TaskInstruction, synthesize_tasks
from .corpus import (
    corpus_stats,
    export_dialogue,
    forge_corpus,
    generate_corpus,
    load_trajectories,
    save_dialogues,
    save_trajectories,
)

log = logging.getLogger("houseworld")

_ROOMS = ("Kitchen", "LivingRoom", "Bedroom", "Bathroom")


def _load_config(path):
    """Flat key=value file; '#' starts a comment."""
    config = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {raw!r}",
                                 line=lineno)
            key, value = line.split("=", 1)
            config[key.strip()] = value.strip()
    return config


def _load_scenes_dir(path):
    scenes = {}
    for name in sorted(os.listdir(path)):
        if not name.endswith(".json"):
            continue
        with open(os.path.join(path, name), "rb") as fh:
            scene = load_scene(fh.read())
        scenes[scene.id] = scene
    if not scenes:
        raise HouseworldError(f"no scene files in {path}")
    return scenes


def _load_tasks_file(path):
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                tasks.append(TaskInstruction.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"bad task record: {exc}", line=lineno)
    return tasks


def _parse_mix(spec):
    """e.g. "enc2enc=5,exposedsearch=3"; names match case-insensitively."""
    lookup = {s.lower(): s for s in SUB_TASKS}
    alias = {
        "exp2exp": "Exp2ExpTransfer", "exp2enc": "Exp2EncTransfer",
        "enc2exp": "Enc2ExpTransfer", "enc2enc": "Enc2EncTransfer",
    }
    mix = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise HouseworldError(f"mix entry {part!r} is not name=count")
        name, count = part.split("=", 1)
        name = name.strip().lower()
        sub = alias.get(name) or lookup.get(name) \
            or lookup.get(name + "transfer")
        if sub is None:
            raise HouseworldError(f"unknown sub-task {name!r}")
        mix[sub] = int(count)
    return mix


def _progress(msg):
    print(json.dumps({"progress": msg}), file=sys.stderr, flush=True)


# -- subcommands --------------------------------------------------------


def cmd_gen_scenes(args, config):
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        seed = derive_seed(args.seed, "scene", i)
        spec = SceneSpec(
            room_type=args.room_type or _ROOMS[i % len(_ROOMS)],
            n_receptacles=args.receptacles,
            n_items=args.items,
            seed=seed,
        )
        scene = generate_scene(spec)
        scene.id = f"scene-{i:04d}"
        out = os.path.join(args.out, f"{scene.id}.json")
        with open(out, "wb") as fh:
            fh.write(save_scene(scene))
    _progress(f"wrote {args.count} scenes to {args.out}")
    return 0


def cmd_gen_tasks(args, config):
    scenes = _load_scenes_dir(args.scenes)
    mix = _parse_mix(args.mix)
    n = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for sid in sorted(scenes):
            tasks = synthesize_tasks(scenes[sid], mix, args.seed)
            for task in tasks:
                fh.write(json.dumps(task.to_dict(), sort_keys=True) + "\n")
                n += 1
    _progress(f"wrote {n} tasks to {args.out}")
    return 0


def cmd_plan(args, config):
    scenes = _load_scenes_dir(args.scenes)
    tasks = _load_tasks_file(args.tasks)
    with open(args.out, "w", encoding="utf-8") as fh:
        for task in tasks:
            scene = scenes[task.scene_id]
            key = derive_key_actions(task, scene)
            plan = insert_search_process(
                key, scene, SearchPolicy(n_detours=args.n_detours),
                derive_seed(args.seed, "plan", task.id),
            )
            fh.write(json.dumps(plan.to_dict(), sort_keys=True) + "\n")
    _progress(f"planned {len(tasks)} tasks to {args.out}")
    return 0


def cmd_forge(args, config):
    if args.stage == "Stage3_Reflection":
        trajs, tasks, scenes, manifest = forge_corpus(
            master_seed=args.seed, scale=args.scale,
        )
    else:
        trajs, tasks, scenes, manifest = generate_corpus(
            stage=args.stage, master_seed=args.seed, scale=args.scale,
            detours=args.n_detours,
        )
    save_trajectories(args.out, trajs, manifest=manifest)
    if args.dialogues:
        records = [
            export_dialogue(t, scenes[t.scene_id]) for t in trajs
        ]
        save_dialogues(args.dialogues, records)
    _progress(f"forged {len(trajs)} trajectories to {args.out}")
    return 0


def cmd_filter(args, config):
    scenes = _load_scenes_dir(args.scenes)
    tasks = {t.id: t for t in _load_tasks_file(args.tasks)}
    trajs = load_trajectories(args.trajectories)
    candidates = [(tasks[t.task_id], t) for t in trajs]
    keys = {
        tid: derive_key_actions(task, scenes[task.scene_id])
        for tid, task in tasks.items()
    }
    report = filter_trajectories(candidates, scenes, keys)
    save_trajectories(args.out, [t for _, t in report.accepted])
    with open(args.out + ".rejected.jsonl", "w", encoding="utf-8") as fh:
        for task, traj, reason in report.rejected:
            fh.write(json.dumps(
                {"task_id": task.id, "reason": reason}, sort_keys=True
            ) + "\n")
    _progress(
        f"accepted {len(report.accepted)}, rejected {len(report.rejected)}"
    )
    return 0


def _pairs_from(args):
    scenes = _load_scenes_dir(args.scenes)
    tasks = _load_tasks_file(args.tasks)
    return [(scenes[t.scene_id], t) for t in tasks]


def cmd_evaluate(args, config):
    pairs = _pairs_from(args)
    all_results = []
    for s in range(args.seeds):
        agent = make_agent(args.agent, seed=derive_seed(args.seed, "agent", s))
        results, _ = evaluate_agent(
            pairs, agent, limits=Limits(), seed=derive_seed(args.seed, s),
        )
        all_results.extend(results)
    report = aggregate(all_results)
    doc = {"report": report.to_dict(), "episodes": flat_table(all_results)}
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_stats(args, config):
    trajs = load_trajectories(args.trajectories)
    stats = corpus_stats(trajs)
    text = json.dumps(stats, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_replay(args, config):
    trajs = load_trajectories(args.trajectories)
    wanted = [t for t in trajs if t.task_id == args.task_id] \
        if args.task_id else trajs[:1]
    if not wanted:
        raise HouseworldError(f"task {args.task_id!r} not in corpus")
    traj = wanted[0]
    print(f"# {traj.task_id} (scene {traj.scene_id}, seed {traj.seed})")
    for i, rec in enumerate(traj.records):
        if rec.kind == "observation":
            print(f"[{i:03d}] OBS  {rec.payload.text}")
        elif rec.kind == "feedback":
            print(f"[{i:03d}] FBK  {rec.payload}")
        elif rec.kind == "thought":
            print(f"[{i:03d}] THK  ({rec.payload.kind}) {rec.payload.text}")
        else:
            mask = "+" if rec.loss_mask else "-"
            print(f"[{i:03d}] ACT{mask} {rec.payload.render()}")
    return 0


def cmd_serve(args, config):
    pairs = _pairs_from(args)
    serve_forever(pairs, ServerConfig(host=args.host, port=args.port))
    return 0


# -- parser -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="houseworld",
        description="Symbolic household-task simulator and data engine.",
    )
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed for all derived randomness")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenes", help="generate scene files")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--room-type", choices=_ROOMS)
    p.add_argument("--receptacles", type=int, default=6)
    p.add_argument("--items", type=int, default=10)
    p.set_defaults(func=cmd_gen_scenes)

    p = sub.add_parser("gen-tasks", help="synthesize task instructions")
    p.add_argument("--scenes", required=True)
    p.add_argument("--mix", required=True,
                   help="per-sub-task counts, e.g. enc2enc=5,exposedsearch=3")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tasks)

    p = sub.add_parser("plan", help="derive key actions and search plans")
    p.add_argument("--scenes", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-detours", type=int, default=0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser(
        "forge", help="generate an annotated corpus (stage presets)")
    p.add_argument("--stage", default="Stage1_Imitation",
                   choices=["Stage1_Imitation", "Stage2_Rejection",
                            "Stage3_Reflection", "TestSet"])
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--n-detours", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--dialogues", help="also export dialogue records here")
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("filter", help="replay-check trajectories (PRM)")
    p.add_argument("--scenes", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("evaluate", help="run an agent over a task set")
    p.add_argument("--scenes", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--agent", default="oracle",
                   help="oracle | random | noisy[:p] | external")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="corpus distribution tables")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("replay", help="textual step-through of a trajectory")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--task-id")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the evaluation service")
    p.add_argument("--scenes", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
    )
    config = {}
    try:
        if args.config:
            config = _load_config(args.config)
        return args.func(args, config)
    except ParseError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 1
    except HouseworldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
