"""Command-line entry points for the full pipeline.

Every stage reads and writes plain files (JSONL board sets, JSON models
and reports, CSV records) so runs can be scripted and resumed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agents import (
    A2CConfig,
    load_agent,
    save_agent,
    train_agent,
    tune,
    write_trial_log,
)
from .board import Board
from .datasets import DEFAULT_N_TEST, BoardSet, build_dataset
from .evaluate import (
    ProbeScenario,
    choice_probe,
    compare,
    cross_evaluate,
    evaluate,
    read_records,
    write_records,
)
from .metamer import MaskedTilePredictor, build_metamer_set, metamer_recipe
from .rules import AbstractionKind
from .stats import match_report

KINDS = [k.value for k in AbstractionKind]
ARCHS = ["rnn", "corelnet"]


def _load_boardset(path: str) -> BoardSet:
    with open(path) as fp:
        return BoardSet.load(fp)


def _write_json(path: str, payload: dict | list) -> None:
    with open(path, "w") as fp:
        json.dump(payload, fp, indent=2)
        fp.write("\n")


def cmd_generate(args: argparse.Namespace) -> int:
    dataset = build_dataset(args.rule, n_train=args.count, seed=args.seed)
    with open(args.out, "w") as fp:
        dataset.save(fp)
    print(f"{args.rule}: {len(dataset.train)} train + {len(dataset.test)} test -> {args.out}")
    return 0


def cmd_train_conditional(args: argparse.Namespace) -> int:
    dataset = _load_boardset(args.boards)
    if dataset.kind.value != args.rule:
        print(f"error: --rule {args.rule} but {args.boards} holds {dataset.kind.value}", file=sys.stderr)
        return 2
    recipe = metamer_recipe(args.rule)
    model = MaskedTilePredictor(
        kind=args.rule,
        max_epochs=args.max_epochs,
        learning_rate=recipe.learning_rate,
        accuracy_target=recipe.accuracy_target,
        random_state=recipe.train_seed,
    ).fit(dataset.train)
    with open(args.out, "w") as fp:
        model.save(fp)
    print(
        f"{args.rule}: trained on {len(dataset.train)} boards, "
        f"{model.n_epochs_} epochs, final accuracy {model.train_log_[-1]:.4f} -> {args.out}"
    )
    return 0


def cmd_sample_metamer(args: argparse.Namespace) -> int:
    with open(args.model) as fp:
        model = MaskedTilePredictor.load(fp)
    if model.kind is None:
        print("error: model file does not record its source abstraction", file=sys.stderr)
        return 2
    n_test = min(DEFAULT_N_TEST, args.count)
    metamers = build_metamer_set(
        model,
        n_train=args.count - n_test,
        n_test=n_test,
        seed=args.seed,
        config=metamer_recipe(model.kind).gibbs,
    )
    with open(args.out, "w") as fp:
        metamers.save(fp)
    print(f"{model.kind}: {len(metamers.train)} train + {len(metamers.test)} test metamers -> {args.out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    set_a = _load_boardset(args.a)
    set_b = _load_boardset(args.b)
    report = match_report(set_a.all_boards, set_b.all_boards)
    report["a"] = {"path": args.a, "kind": set_a.kind.value, "condition": set_a.condition}
    report["b"] = {"path": args.b, "kind": set_b.kind.value, "condition": set_b.condition}
    _write_json(args.out, report)
    p_first = report["first"]["p"]
    shown = f"{p_first:.4f}" if p_first is not None else "undefined"
    print(f"first-order p={shown} -> {args.out}")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    dataset = _load_boardset(args.dataset)
    result = tune(
        args.arch,
        dataset,
        budget_trials=args.trials,
        episodes_per_trial=args.episodes_per_trial,
        seed=args.seed,
    )
    if result.best_config is None:
        print("error: every trial was pruned; nothing to report", file=sys.stderr)
        return 1
    _write_json(
        args.out,
        {
            "arch": args.arch,
            "dataset_fingerprint": dataset.fingerprint(),
            "best_reward": result.best_reward,
            "best_config": result.best_config.to_dict(),
            "n_trials": args.trials,
        },
    )
    trial_path = Path(args.out).with_suffix(".trials.csv")
    with open(trial_path, "w") as fp:
        write_trial_log(result.records, fp)
    print(f"best reward {result.best_reward:.3f} -> {args.out} (trials: {trial_path})")
    return 0


def _load_config(path: str, episodes: int) -> A2CConfig:
    with open(path) as fp:
        payload = json.load(fp)
    fields = payload.get("best_config", payload)
    fields = {k: v for k, v in fields.items() if k != "total_episodes"}
    return A2CConfig(total_episodes=episodes, **fields)


def cmd_train_agent(args: argparse.Namespace) -> int:
    dataset = _load_boardset(args.dataset)
    config = _load_config(args.config, args.episodes)

    last_printed = [0]

    def progress(episodes_done: int, lr: float) -> None:
        if episodes_done - last_printed[0] >= 1000:
            last_printed[0] = episodes_done
            print(f"  {episodes_done}/{config.total_episodes} episodes (lr {lr:.2e})", file=sys.stderr)

    result = train_agent(dataset, args.arch, config, progress=progress)
    with open(args.out, "w") as fp:
        save_agent(result.agent, fp, config=config, dataset_fingerprint=dataset.fingerprint())
    tail = result.reward_curve[-1] if result.reward_curve else float("nan")
    print(f"{args.arch} on {Path(args.dataset).name}: final reward window {tail:.3f} -> {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    with open(args.agent) as fp:
        saved = load_agent(fp)
    dataset = _load_boardset(args.dataset)
    records = evaluate(
        saved.agent,
        dataset,
        baseline_trials=args.baseline_trials,
        agent_fingerprint=saved.dataset_fingerprint,
    )
    if args.cross:
        cross_set = _load_boardset(args.cross)
        records += cross_evaluate(
            saved.agent, dataset, cross_set, baseline_trials=args.baseline_trials
        )
    with open(args.out, "w") as fp:
        write_records(records, fp)
    defined = [r.z for r in records if r.z is not None]
    mean = float(np.mean(defined)) if defined else float("nan")
    print(f"{len(records)} records, mean z {mean:.3f} -> {args.out}")
    return 0


def cmd_probe(args: argparse.Namespace) -> int:
    with open(args.agent) as fp:
        saved = load_agent(fp)
    with open(args.scenarios) as fp:
        raw = json.load(fp)
    probes = []
    for i, entry in enumerate(raw):
        scenario = ProbeScenario(
            board=Board(np.asarray(entry["tiles"], dtype=np.uint8)),
            start_tile=entry["start_tile"],
            history=tuple(entry.get("history", ())),
            label=entry.get("label", f"scenario-{i}"),
        )
        probes.append(choice_probe(saved.agent, scenario))
    _write_json(args.out, probes)
    n_red = sum(p["argmax_is_red"] for p in probes)
    print(f"{len(probes)} probes, argmax red on {n_red} -> {args.out}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    with open(args.records) as fp:
        records = read_records(fp)
    if args.human_records:
        with open(args.human_records) as fp:
            records += read_records(fp)
    report = compare(records, allow_partial=not args.human_records)
    _write_json(args.out, report.to_json())
    print(f"{report.n_records} records ({report.n_undefined_z} undefined z) -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import run_server

    run_server(
        port=args.port,
        plan_path=args.plan,
        log_path=args.log,
        static_dir=args.static,
        baseline_trials=args.baseline_trials,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilemeta", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a board dataset for one abstraction")
    p.add_argument("--rule", required=True, choices=KINDS)
    p.add_argument("--count", required=True, type=int, help="training boards to draw")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-conditional", help="fit the masked-tile model for one abstraction")
    p.add_argument("--rule", required=True, choices=KINDS)
    p.add_argument("--boards", required=True, help="board set file from generate")
    p.add_argument("--out", required=True)
    p.add_argument("--max-epochs", type=int, default=4000)
    p.set_defaults(func=cmd_train_conditional)

    p = sub.add_parser("sample-metamer", help="draw lookalike boards from a trained conditional")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_metamer)

    p = sub.add_parser("stats", help="statistic-match report between two board files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("tune", help="random hyperparameter search with median pruning")
    p.add_argument("--arch", required=True, choices=ARCHS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--trials", required=True, type=int)
    p.add_argument("--episodes-per-trial", required=True, type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train-agent", help="train one agent with a tuned configuration")
    p.add_argument("--arch", required=True, choices=ARCHS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", required=True, help="hp.json from tune, or a bare config")
    p.add_argument("--episodes", required=True, type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_agent)

    p = sub.add_parser("eval", help="play the test split and z-score against random clicking")
    p.add_argument("--agent", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--cross", help="second dataset for transfer evaluation")
    p.add_argument("--baseline-trials", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="policy distributions on scripted scenarios")
    p.add_argument("--agent", required=True)
    p.add_argument("--scenarios", required=True, help="JSON list of boards with reveal histories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("analyze", help="t-tests and ANOVA over performance records")
    p.add_argument("--records", required=True)
    p.add_argument("--human-records", help="extra records to merge before comparison")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the data-collection web service")
    p.add_argument("--port", required=True, type=int)
    p.add_argument("--plan", required=True, help="experiment plan JSON")
    p.add_argument("--log", required=True, help="append-only event log (JSONL)")
    p.add_argument("--static", help="directory with the web client, served at /")
    p.add_argument("--baseline-trials", type=int, default=1000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
