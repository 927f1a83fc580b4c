"""Command-line entry point: ``hiercl {synth,train,eval,sweep,export-reps}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import TrainConfig, dump_config, load_config_file, parse_value
from .corpus import CorpusError, Vocabulary, load_corpus, read_records, split_records, synth_records, write_records
from .hierarchy import HierarchyError, SenseHierarchy, load_hierarchy, save_hierarchy
from .metrics import evaluate, export_representations, format_report
from .model import CheckpointError, load_checkpoint, save_checkpoint
from .trainer import fit, infer

logger = logging.getLogger("hiercl")

CONFIG_ENV = "HIERCL_CONFIG"
SYNTH_META = "synth.json"
SWEEP_PARAMS = {"L1": "mhia_layers", "L2": "gcn_layers", "lambda1": "lambda_global",
                "lambda2": "lambda_local", "tau": "tau"}
ABLATION_FLAGS = {"no_mhia": "mhia_off", "no_staircase": "staircase_off", "no_lg": "lg_off",
                  "no_ll": "ll_off", "ll_hard": "ll_hard"}
# config fields that get their own --flag; everything else goes through --set
OVERRIDE_FLAGS = ("lr", "epochs", "batch_size", "eval_interval", "seed", "lambda_global",
                  "lambda_local", "tau", "d_h", "mhia_layers", "gcn_layers", "dropout")


class UsageError(Exception):
    pass


# -- shared argument groups --------------------------------------------------

def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="directory with hierarchy.json and train/dev/test.jsonl")
    p.add_argument("--hierarchy", type=Path, help="hierarchy file (overrides DATA/hierarchy.json)")
    p.add_argument("--train", type=Path, help="training records (overrides DATA/train.jsonl)")
    p.add_argument("--dev", type=Path, help="dev records (overrides DATA/dev.jsonl)")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path,
                   help=f"key = value config file (default: ${CONFIG_ENV} if set)")
    p.add_argument("--preset", choices=("published", "desk"),
                   help="base settings; defaults to desk for synthetic data, published otherwise")
    for key in OVERRIDE_FLAGS:
        p.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field; repeatable")
    p.add_argument("--no-mhia", action="store_true", help="drop the interactive attention layers")
    p.add_argument("--no-staircase", action="store_true", help="independent per-level heads")
    p.add_argument("--no-lg", action="store_true", help="drop the global contrastive loss")
    p.add_argument("--no-ll", action="store_true", help="drop the local contrastive loss")
    p.add_argument("--ll-hard", action="store_true", help="exact-match weights in the local loss")


def _paths(args) -> dict:
    data = args.data
    out = {
        "hierarchy": args.hierarchy or (data / "hierarchy.json" if data else None),
        "train": getattr(args, "train", None) or (data / "train.jsonl" if data else None),
        "dev": getattr(args, "dev", None) or (data / "dev.jsonl" if data else None),
    }
    if out["hierarchy"] is None:
        raise UsageError("give --data or --hierarchy")
    return out


def build_config(args) -> TrainConfig:
    """Preset, then config file, then command-line overrides."""
    preset = args.preset
    if preset is None:
        preset = "desk" if args.data and (args.data / SYNTH_META).exists() else "published"
    values: dict = {}
    config_path = args.config or (Path(os.environ[CONFIG_ENV]) if os.environ.get(CONFIG_ENV) else None)
    if config_path:
        values.update(load_config_file(config_path))
    for key in OVERRIDE_FLAGS:
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = parse_value(key, raw)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), raw)
    for flag, key in ABLATION_FLAGS.items():
        if getattr(args, flag, False):
            values[key] = True
    return getattr(TrainConfig, preset)(**values)


def _load_training_data(paths: dict, max_len: int):
    hierarchy = load_hierarchy(paths["hierarchy"])
    if paths["train"] is None or not paths["train"].exists():
        raise UsageError(f"training file not found: {paths['train']}")
    records = read_records(paths["train"])
    vocab = Vocabulary.build(f"{r.get('arg1', '')} {r.get('arg2', '')}" for r in records if isinstance(r, dict))
    train = load_corpus(paths["train"], hierarchy, vocab, max_len)
    dev = None
    if paths["dev"] is not None and paths["dev"].exists():
        dev = load_corpus(paths["dev"], hierarchy, vocab, max_len)
    return hierarchy, vocab, train, dev


# -- commands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.hierarchy:
        hierarchy = load_hierarchy(args.hierarchy)
    else:
        hierarchy = SenseHierarchy.tree(tuple(int(w) for w in args.widths.split(",")))
    records = synth_records(hierarchy, args.n, args.noise, args.seed)
    train, dev, test = split_records(records, args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_hierarchy(hierarchy, out / "hierarchy.json")
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        write_records(part, out / f"{name}.jsonl")
    meta = {"n": args.n, "noise": args.noise, "seed": args.seed,
            "level_sizes": list(hierarchy.level_sizes),
            "splits": {"train": len(train), "dev": len(dev), "test": len(test)}}
    (out / SYNTH_META).write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    print(f"wrote {len(train)}/{len(dev)}/{len(test)} records to {out}")
    return 0


def cmd_train(args) -> int:
    config = build_config(args)
    hierarchy, vocab, train, dev = _load_training_data(_paths(args), config.max_len)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    echo = dump_config(config)
    (out / "config.txt").write_text(echo)
    sys.stdout.write(echo)
    result = fit(config, train, hierarchy, vocab, dev=dev, log_path=out / "train_log.jsonl")
    save_checkpoint(out / "checkpoint.json", result.checkpoint())
    print(f"best step {result.best_step}; checkpoint written to {out / 'checkpoint.json'}")
    return 0


def _eval_inputs(args):
    ck = load_checkpoint(args.checkpoint)
    hierarchy_path = args.hierarchy or (args.data / "hierarchy.json" if args.data else None)
    if hierarchy_path is not None and Path(hierarchy_path).exists():
        ck.check_hierarchy(load_hierarchy(hierarchy_path))
    path = args.input or (args.data / f"{args.split}.jsonl" if args.data else None)
    if path is None:
        raise UsageError("give --data or --input")
    return ck, load_corpus(path, ck.hierarchy, ck.vocab, ck.config.max_len)


def cmd_eval(args) -> int:
    ck, instances = _eval_inputs(args)
    preds = infer(ck, instances)
    report = evaluate(preds, [x.gold for x in instances], ck.hierarchy, labelwise=args.labelwise,
                      binding="strict" if args.strict_binding else "any")
    text = format_report(report)
    sys.stdout.write(text)
    if args.out:
        args.out.write_text(text)
    return 0


def cmd_export_reps(args) -> int:
    ck, instances = _eval_inputs(args)
    n = export_representations(ck, instances, args.out)
    print(f"wrote {n} records to {args.out}")
    return 0


def _sweep_point(config: TrainConfig, paths: dict) -> dict:
    hierarchy, vocab, train, dev = _load_training_data(paths, config.max_len)
    if not dev:
        raise UsageError("sweep needs a dev split")
    result = fit(config, train, hierarchy, vocab, dev=dev)
    return evaluate(infer(result.model, dev), [x.gold for x in dev])


def _grid_values(param: str, grid: str) -> list:
    key = SWEEP_PARAMS[param]
    return [parse_value(key, v) for v in grid.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    base = build_config(args)
    key = SWEEP_PARAMS[args.param]
    values = _grid_values(args.param, args.grid)
    if not values:
        raise UsageError("empty grid")
    configs = [base.replace(**{key: v}) for v in values]
    paths = _paths(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            reports = list(pool.map(_sweep_point, configs, [paths] * len(configs)))
    else:
        reports = [_sweep_point(c, paths) for c in configs]

    n_levels = len(reports[0]["levels"])
    header = [args.param] + [f"level{m}_macro_f1" for m in range(1, n_levels + 1)] + ["mean_macro_f1"]
    if "top_sec" in reports[0]:
        header.append("top_sec")
    rows = []
    for v, rep in zip(values, reports):
        row = [str(v)] + [f"{e['macro_f1']:.4f}" for e in rep["levels"]] + [f"{rep['mean_macro_f1']:.4f}"]
        if "top_sec" in rep:
            row.append(f"{rep['top_sec']:.4f}")
        rows.append(row)
    table = "\n".join("\t".join(r) for r in [header] + rows) + "\n"
    sys.stdout.write(table)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{args.param}.tsv").write_text(table)
    (out / "config.txt").write_text(dump_config(base))
    if args.plot:
        _plot_sweep(args.param, values, reports, out / f"sweep_{args.param}.png")
    return 0


def _plot_sweep(param: str, values: list, reports: list, path: Path) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping %s", path.name)
        return
    fig, ax = plt.subplots(figsize=(4, 3))
    for m in range(len(reports[0]["levels"])):
        ax.plot(values, [r["levels"][m]["macro_f1"] for r in reports], marker="o", label=f"level {m + 1}")
    ax.set_xlabel(param)
    ax.set_ylabel("dev macro-F1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiercl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus with train/dev/test splits")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--widths", default="4,8,16", help="senses per level of a generated tree")
    p.add_argument("--hierarchy", type=Path, help="use this hierarchy instead of a generated tree")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and write checkpoint.json, train_log.jsonl, config.txt")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (("eval", cmd_eval, "metric report for a checkpoint"),
                                  ("export-reps", cmd_export_reps, "dump relation representations")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", type=Path, required=True)
        p.add_argument("--data", type=Path)
        p.add_argument("--hierarchy", type=Path, help="hierarchy the data uses; must match the checkpoint")
        p.add_argument("--split", default="test", choices=("train", "dev", "test"))
        p.add_argument("--input", type=Path, help="records file (overrides DATA/SPLIT.jsonl)")
        if name == "eval":
            p.add_argument("--labelwise", action="store_true", help="add per-class F1")
            p.add_argument("--strict-binding", action="store_true",
                           help="judge all levels against a single gold sequence")
            p.add_argument("--out", type=Path, help="also write the report here")
        else:
            p.add_argument("--out", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="vary one hyperparameter over a grid, scoring on dev")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write a png (needs matplotlib)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusError, HierarchyError, CheckpointError, KeyError, ValueError, OSError) as exc:
        print(f"hiercl {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
