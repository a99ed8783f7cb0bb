"""``antiplan`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.
Every subcommand accepts ``--config FILE.json`` whose keys are option
destinations as listed by ``--help`` (``sequences_per_env`` for
``--sequences``; dashes or underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seed_list(text: str) -> list[int]:
    """``"0-3,7"`` -> ``[0, 1, 2, 3, 7]``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _add_env(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--env", help="environment JSON file")
    g.add_argument("--env-seed", type=int, help="generate the environment from this seed")
    p.add_argument("--profile", default="default", help="generation profile for --env-seed")
    p.add_argument("--state", help="start state JSON (default: the environment's initial state)")


def _add_estimator(p):
    p.add_argument("--estimator", choices=("exact", "learned"), default="exact")
    p.add_argument("--model", help="model JSON for --estimator learned")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="antiplan", description="Anticipatory task planning in blockworld.")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def command(name, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        return p

    p = command("generate-envs", "generate environments and write env_<seed>.json files")
    p.add_argument("--seeds", type=_seed_list, default=[0], help="e.g. 0-9,12")
    p.add_argument("--profile", default="default")
    p.add_argument("--out", default=".", help="output directory")

    p = command("gen-data", "label random states with the exact anticipatory cost")
    p.add_argument("--train-envs", type=int, default=250)
    p.add_argument("--test-envs", type=int, default=150)
    p.add_argument("--first-env-seed", type=int, default=0)
    p.add_argument("--states-per-env", type=int, default=200)
    p.add_argument("--profile", default="default")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", default="data", help="output directory (train.jsonl, test.jsonl)")

    p = command("train", "train the graph regressor on a JSONL dataset")
    p.add_argument("--data", help="training JSONL (required)")
    p.add_argument("--test", help="held-out JSONL to report MAE on")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--out", default="model.json")

    p = command("solve", "optimal plan for one task")
    _add_env(p)
    p.add_argument("--task", help='required, e.g. "A:red" or "A:red,B:blue"')
    p.add_argument("--engine", choices=("macro", "astar"), default="astar",
                   help="astar: ground and run A*+h_max; macro: compiled macro-step search")

    p = command("plan", "myopic or anticipatory plan for one task")
    _add_env(p)
    p.add_argument("--task", help="required")
    p.add_argument("--mode", choices=("myopic", "ap"), default="ap")
    p.add_argument("--max-candidates", type=int, default=64)
    _add_estimator(p)

    p = command("prepare", "task-free preparation of the environment")
    _add_env(p)
    p.add_argument("--iterations", type=int, default=200)
    _add_estimator(p)

    p = command("bench", "run planner configurations over task sequences; write CSV")
    p.add_argument("--preset", choices=("desk", "full"), default="desk")
    p.add_argument("--env-seeds", type=_seed_list)
    p.add_argument("--sequences", type=int, dest="sequences_per_env")
    p.add_argument("--tasks", type=int, dest="tasks_per_sequence")
    p.add_argument("--configurations", type=lambda s: tuple(x for x in s.split(",") if x))
    p.add_argument("--prep-iterations", type=int)
    p.add_argument("--profile")
    _add_estimator(p)
    p.add_argument("--charge-prep", action="store_true", default=None,
                   help="charge preparation actions to the first task")
    p.add_argument("--timing", action="store_true", default=None,
                   help="record wall-clock time (the CSV is then not reproducible)")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-resume", action="store_true")
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--summary-json", help="also write the summary as JSON here")

    p = command("summarize", "summarize a bench CSV")
    p.add_argument("csv")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"antiplan: error: cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("antiplan: error: config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        defaults = {}
        for k, v in cfg.items():
            dest = k.replace("-", "_")
            if dest not in known:
                raise UsageError(f"antiplan {args.command}: error: unknown config key {k!r}")
            defaults[dest] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _require(args, *names):
    # required options are checked here so they can also come from --config
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"antiplan {args.command}: error: --{name.replace('_', '-')} is required")


def _load_env(args):
    from .blockworld import environment_for_seed, load_env, state_from_dict
    if args.env is None and args.env_seed is None:
        raise UsageError(f"antiplan {args.command}: error: one of --env or --env-seed is required")
    env = load_env(args.env) if args.env else environment_for_seed(args.env_seed, args.profile)
    s0 = env.initial_state
    if args.state:
        s0 = state_from_dict(json.loads(Path(args.state).read_text()))
    return env, s0


def _estimator(args, env):
    from .anticipatory import EstimatorModel, ExactEstimator, LearnedEstimator
    if args.estimator == "learned":
        if not args.model:
            raise UsageError("antiplan: error: --estimator learned needs --model")
        return LearnedEstimator(EstimatorModel.load(args.model), env)
    return ExactEstimator(env)


def _print_json(obj):
    print(json.dumps(obj, indent=1))


def cmd_generate_envs(args):
    from .blockworld import generate_environment, profile_params, save_env
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = profile_params(args.profile)
    for seed in args.seeds:
        path = save_env(generate_environment(seed, params), out)
        print(path)


def cmd_gen_data(args):
    from .anticipatory import default_split, generate_dataset, save_dataset
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_seeds, test_seeds = default_split(args.train_envs, args.test_envs, args.first_env_seed)
    rng = np.random.default_rng(args.seed)
    for name, seeds in (("train", train_seeds), ("test", test_seeds)):
        if not seeds:
            continue
        data = generate_dataset(seeds, args.states_per_env, rng, args.workers, args.profile)
        path = save_dataset(data, out / f"{name}.jsonl")
        print(f"{path}: {len(data)} records from {len(seeds)} environments")


def cmd_train(args):
    from .anticipatory import TrainConfig, load_dataset, mean_absolute_error, train
    _require(args, "data")
    data = load_dataset(args.data)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch, hidden=args.hidden)
    model, history = train(data, cfg, np.random.default_rng(args.seed))
    model.save(args.out)
    report = {"model": str(args.out), "train_mae_per_epoch": history}
    if args.test:
        test = load_dataset(args.test)
        mean = float(np.mean([d.label for d in data]))
        report["test_mae"] = mean_absolute_error(model, test)
        report["test_mae_constant_predictor"] = float(np.mean([abs(d.label - mean) for d in test]))
        report["test_label_mean"] = float(np.mean([d.label for d in test]))
    _print_json(report)


def cmd_solve(args):
    from . import planner
    from .blockworld import TaskSpec, check_task
    _require(args, "task")
    env, s0 = _load_env(args)
    task = TaskSpec.parse(args.task)
    check_task(env, task)
    old = planner.set_engine(args.engine)
    try:
        sol = planner.solve_task(env, s0, task)
    finally:
        planner.set_engine(old)
    _print_json(sol.plan.to_dict())


def cmd_plan(args):
    from .ap_search import anticipatory_plan, myopic_plan
    from .blockworld import TaskSpec, check_task
    _require(args, "task")
    env, s0 = _load_env(args)
    task = TaskSpec.parse(args.task)
    check_task(env, task)
    est = _estimator(args, env)
    if args.mode == "ap":
        res = anticipatory_plan(env, s0, task, est, args.max_candidates)
    else:
        res = myopic_plan(env, s0, task, est)
    _print_json(res.to_dict())


def cmd_prepare(args):
    from .ap_search import prepare_trace
    env, s0 = _load_env(args)
    est = _estimator(args, env)
    res = prepare_trace(env, s0, est, args.iterations, np.random.default_rng(args.seed))
    _print_json(res.to_dict())


def cmd_bench(args):
    from .bench import BenchConfig, run_bench, summarize
    if args.estimator == "learned" and not args.model:
        raise UsageError("antiplan: error: --estimator learned needs --model")
    config = BenchConfig.preset(
        args.preset, env_seeds=args.env_seeds, sequences_per_env=args.sequences_per_env,
        tasks_per_sequence=args.tasks_per_sequence, configurations=args.configurations,
        estimator=args.estimator, model_path=args.model, seed=args.seed,
        prep_iterations=args.prep_iterations, charge_prep=args.charge_prep,
        timing=args.timing, workers=args.workers, profile=args.profile)
    records = run_bench(config, args.out, resume=not args.no_resume)
    summary = summarize(records)
    print(summary.table())
    if args.summary_json:
        Path(args.summary_json).write_text(json.dumps(summary.to_dict(), indent=1) + "\n")


def cmd_summarize(args):
    from .bench import check_prefix_sums, read_csv, summarize
    records = read_csv(args.csv)
    check_prefix_sums(records)
    summary = summarize(records)
    if args.json:
        _print_json(summary.to_dict())
    else:
        print(summary.table())


COMMANDS = {
    "generate-envs": cmd_generate_envs,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "solve": cmd_solve,
    "plan": cmd_plan,
    "prepare": cmd_prepare,
    "bench": cmd_bench,
    "summarize": cmd_summarize,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"antiplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
