"""Command-line entry point: ``reverbaug {simulate,augment,train,evaluate,report}``.

Every subcommand accepts ``--config FILE``, a JSON object whose keys are the
long flag names with dashes replaced by underscores. Explicit flags override
the file, which overrides the built-in defaults. The resolved settings are
written to ``run_config.json`` in the output directory and can be fed back
through ``--config``. ``--jobs`` and ``--out`` are left out of that record
because they never change the results.

Output directories default to ``$REVERBAUG_OUT/<subcommand>`` (``./runs``
when the variable is unset).

Exit codes: 0 success, 2 bad arguments or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acoustics import (MODEL_KINDS, analyze_rir, kind_from_name, read_rir, simulate_rir,
                        write_rir)
from .corpus import (MixRanges, build_test_set, build_training_set, load_corpus_dir, load_entry,
                     pad_silence, read_manifest, synth_corpus)
from .errors import InsufficientDecayError, ReverbaugError
from .evaluation import (MEASURES, MetricReport, evaluate, write_json, write_report_csv,
                         write_roc_csv)
from .geometry import SimParams, read_scenarios, sample_scenarios, write_scenarios
from .parallel import pmap
from .vad import FrameSpec, dataset, load_model, save_model, score, train

log = logging.getLogger("reverbaug")

EXIT_OK, EXIT_ARGS, EXIT_RUNTIME = 0, 2, 3
OUT_ENV = "REVERBAUG_OUT"
_NOT_RECORDED = {"command", "config", "jobs", "out", "func", "verbose"}


class ArgumentFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentFailure(f"{self.prog}: {message}")


def _out_default(name):
    return str(Path(os.environ.get(OUT_ENV, "runs")) / name)


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def _common(p):
    p.add_argument("--config", help="JSON file with default values for any flag")
    p.add_argument("--out", help="output directory (default: $REVERBAUG_OUT/<command>)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def _sampling(p):
    p.add_argument("--scenarios", help="scenario JSONL to use instead of random sampling")
    p.add_argument("--rooms", type=int, default=50, help="random rooms (default 50)")
    p.add_argument("--placements", type=int, default=20, help="placements per room (default 20)")
    p.add_argument("--dim-range", type=float, nargs=2, default=[3.0, 20.0], metavar=("LO", "HI"))
    p.add_argument("--rt60-range", type=float, nargs=2, default=[0.1, 1.0], metavar=("LO", "HI"))
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="diffusion")
    p.add_argument("--model-param", type=_kv, action="append", default=[], metavar="KEY=VALUE",
                   help="model parameter override, VALUE parsed as JSON (repeatable)")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--speed-of-sound", type=float, default=343.0)
    p.add_argument("--rir-length", type=float, default=None,
                   help="fixed RIR length in seconds (default: 1.2 x RT60, at least 0.25 s)")


def build_parser():
    ap = _Parser(prog="reverbaug", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"reverbaug {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample scenarios and write RIRs")
    _common(p)
    _sampling(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("augment", help="build a training or test corpus")
    _common(p)
    p.add_argument("--mode", choices=("train", "test"), default="train")
    p.add_argument("--corpus", help="directory of <id>.wav + <id>.txt segment files")
    p.add_argument("--synth", type=int, default=None, help="generate N synthetic utterances")
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--duration-range", type=float, nargs=2, default=[2.0, 4.0], metavar=("LO", "HI"))
    p.add_argument("--pad", type=float, default=0.0, help="seconds of silence to add")
    p.add_argument("--pad-where", choices=("append", "prepend", "split"), default="append")
    _sampling(p)
    p.add_argument("--rirs", help="test mode: directory of RIR WAVs (sidecars optional)")
    p.add_argument("--snr-range", type=float, nargs=2, default=[10.0, 20.0], metavar=("LO", "HI"))
    p.add_argument("--noise-kinds", nargs="+", default=["white", "colored"],
                   choices=("white", "colored", "file"))
    p.add_argument("--noise-files", nargs="*", default=[])
    p.add_argument("--no-anechoic", action="store_true",
                   help="train mode: skip the noise-only anechoic copies")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="fit the frame classifier on one or more manifests")
    _common(p)
    p.add_argument("--manifest", nargs="+", required=False)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--context", type=int, default=2)
    p.add_argument("--frame-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=10.0)
    p.add_argument("--max-frames", type=int, default=None,
                   help="random subset of training frames (seeded)")
    p.add_argument("--scenario", nargs="+", default=None, metavar="ID",
                   help="keep only these scenario ids, e.g. 'anechoic' for the baseline")
    p.add_argument("--condition", default=None, help="training condition label")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a manifest and write metric and ROC tables")
    _common(p)
    p.add_argument("--model")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--condition", default=None, help="default: the model's training condition")
    p.add_argument("--environment", default=None, help="default: manifest directory name")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="join evaluation reports into a comparison grid")
    _common(p)
    p.add_argument("--reports", nargs="+")
    p.add_argument("--baseline", default="anechoic", help="condition the deltas refer to")
    p.set_defaults(func=cmd_report)
    return ap


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentFailure(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ArgumentFailure(f"config {args.config} must hold a JSON object")
        if cfg.pop("command", args.command) != args.command:
            raise ArgumentFailure(f"config {args.config} belongs to another subcommand")
        cfg.pop("version", None)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ArgumentFailure(f"unknown config keys for {args.command}: {sorted(unknown)}")
        if "model_param" in cfg and isinstance(cfg["model_param"], dict):
            cfg["model_param"] = [list(kv) for kv in cfg["model_param"].items()]
        sub.set_defaults(**cfg)
        args = ap.parse_args(argv)
    if args.out is None:
        args.out = _out_default(args.command)
    if args.jobs < 1:
        raise ArgumentFailure("--jobs must be >= 1")
    return args


def _record(args, out):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}
    cfg["command"] = args.command
    cfg["version"] = __version__
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg, out / "run_config.json")


def _kind(args):
    try:
        return kind_from_name(args.model, **dict(tuple(kv) for kv in args.model_param))
    except (TypeError, ValueError) as exc:
        raise ArgumentFailure(f"bad model parameters: {exc}") from None


def _params(args):
    return SimParams(args.speed_of_sound, args.sample_rate, args.rir_length)


def _scenarios(args):
    if args.scenarios:
        return read_scenarios(args.scenarios)
    return sample_scenarios(args.rooms, args.placements, tuple(args.dim_range),
                            tuple(args.rt60_range), seed=args.seed)


def _simulate_one(task):
    scenario, kind, params, rir_dir = task
    try:
        rir = simulate_rir(scenario, kind, params)
    except ReverbaugError as exc:
        return scenario.scenario_id, None, None, f"{type(exc).__name__}: {exc}"
    try:
        a = analyze_rir(rir)
        rt, drr = a.rt60_est, a.direct_to_reverberant_ratio
    except InsufficientDecayError:
        rt, drr = None, None
    write_rir(rir, Path(rir_dir) / f"{scenario.scenario_id}.wav", rt60_est=rt)
    return scenario.scenario_id, rt, drr, None


def cmd_simulate(args):
    out = Path(args.out)
    kind = _kind(args)
    params = _params(args)
    scenarios = _scenarios(args)
    _record(args, out)
    (out / "rirs").mkdir(parents=True, exist_ok=True)
    write_scenarios(scenarios, out / "scenarios.jsonl")
    results = pmap(_simulate_one, [(s, kind, params, out / "rirs") for s in scenarios], args.jobs)
    targets = {s.scenario_id: s.rt60_target for s in scenarios}
    errors = []
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "rt60_target", "rt60_est", "drr_db"])
        for sid, rt, drr, err in results:
            if err:
                errors.append(f"{sid}: {err}")
                continue
            w.writerow([sid, targets[sid], "" if rt is None else f"{rt:.4f}",
                        "" if drr is None else f"{drr:.2f}"])
            tgt = "-" if targets[sid] is None else f"{targets[sid]:.3f}"
            est = "n/a" if rt is None else f"{rt:.3f}"
            print(f"{sid}  rt60 target {tgt} s  estimated {est} s")
    ok = len(scenarios) - len(errors)
    print(f"{ok}/{len(scenarios)} RIRs written to {out / 'rirs'} (model {kind.name})")
    return _report_errors(errors, out)


def _report_errors(errors, out):
    if not errors:
        return EXIT_OK
    (out / "errors.log").write_text("".join(e + "\n" for e in errors))
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_RUNTIME


def _corpus(args):
    if (args.corpus is None) == (args.synth is None):
        raise ArgumentFailure("give exactly one of --corpus and --synth")
    if args.synth is not None:
        utts = synth_corpus(args.synth, tuple(args.duration_range), seed=args.synth_seed,
                            sample_rate=args.sample_rate)
    else:
        utts = load_corpus_dir(args.corpus)
        if not utts:
            raise ArgumentFailure(f"no .wav files in {args.corpus}")
    return [pad_silence(u, args.pad, args.pad_where) for u in utts]


def cmd_augment(args):
    out = Path(args.out)
    utts = _corpus(args)
    _record(args, out)
    if args.mode == "train":
        kind = _kind(args)
        mix = MixRanges(tuple(args.snr_range), tuple(args.noise_kinds),
                        noise_paths=tuple(args.noise_files))
        res = build_training_set(utts, _scenarios(args), kind, mix, not args.no_anechoic, out,
                                 seed=args.seed, params=_params(args), jobs=args.jobs)
    else:
        if not args.rirs:
            raise ArgumentFailure("test mode needs --rirs")
        rirs = [read_rir(p) for p in sorted(Path(args.rirs).glob("*.wav"))]
        if not rirs:
            raise ArgumentFailure(f"no RIR WAVs in {args.rirs}")
        res = build_test_set(utts, rirs, out, jobs=args.jobs)
    print(f"{len(res.entries)} entries written to {res.manifest_path}")
    return EXIT_RUNTIME if res.errors else EXIT_OK


def _frame_spec(args):
    return FrameSpec(args.frame_ms, args.hop_ms)


def _manifest_dataset(paths, spec, context, scenarios=None):
    entries = [e for p in paths for e in read_manifest(p)
               if scenarios is None or e.scenario_id in scenarios]
    if not entries:
        raise ArgumentFailure("no manifest entries selected")
    return dataset((load_entry(e) for e in entries), spec, context), len(entries)


def cmd_train(args):
    if not args.manifest:
        raise ArgumentFailure("train needs --manifest")
    out = Path(args.out)
    spec = _frame_spec(args)
    (X, y), n_entries = _manifest_dataset(args.manifest, spec, args.context, args.scenario)
    if args.max_frames and y.size > args.max_frames:
        keep = np.sort(np.random.default_rng(args.seed).choice(y.size, args.max_frames,
                                                              replace=False))
        X, y = X[keep], y[keep]
    condition = args.condition or Path(args.manifest[0]).parent.name
    meta = {"manifests": list(args.manifest), "condition": condition, "n_entries": n_entries,
            "frame_ms": args.frame_ms, "hop_ms": args.hop_ms, "context": args.context}
    model = train(X, y, epochs=args.epochs, lr=args.lr, l2=args.l2,
                  batch_size=args.batch_size, seed=args.seed, meta=meta)
    _record(args, out)
    save_model(model, out / "model.json")
    hist = model.meta["loss_history"]
    print(f"trained on {y.size} frames from {n_entries} entries; "
          f"loss {hist[0]:.4f} -> {hist[-1]:.4f}; model at {out / 'model.json'}")
    return EXIT_OK


def cmd_evaluate(args):
    if not args.model or not args.manifest:
        raise ArgumentFailure("evaluate needs --model and --manifest")
    out = Path(args.out)
    model = load_model(args.model)
    m = model.meta
    spec = FrameSpec(m.get("frame_ms", 25.0), m.get("hop_ms", 10.0))
    (X, y), _ = _manifest_dataset([args.manifest], spec, m.get("context", 2))
    condition = args.condition or m.get("condition", "model")
    env = args.environment or Path(args.manifest).parent.name
    report, roc = evaluate(score(model, X), y, args.threshold, dataset_id=env)
    _record(args, out)
    stem = f"logreg__{condition}__{env}"
    write_roc_csv(roc, out / f"{stem}_roc.csv")
    row = {"vad": "logreg", "condition": condition, "environment": env,
           "threshold": args.threshold, **_measures(report, roc.auc), **report.to_dict()["counts"]}
    write_report_csv([row], out / f"{stem}_metrics.csv")
    write_json({"vad": "logreg", "condition": condition, "environment": env,
                "report": report.to_dict(), "auc": roc.auc}, out / f"{stem}_report.json")
    print(f"{condition} on {env}: " + ", ".join(f"{k} {row[k]:.4f}" for k in MEASURES))
    return EXIT_OK


def _measures(report, auc):
    return {"accuracy": report.accuracy, "precision": report.precision, "recall": report.recall,
            "f1": report.f1, "auc": auc}


def cmd_report(args):
    if not args.reports:
        raise ArgumentFailure("report needs --reports")
    out = Path(args.out)
    cells = {}
    for p in args.reports:
        d = json.loads(Path(p).read_text())
        r = MetricReport.from_dict(d["report"])
        cells[(d["condition"], d["environment"])] = _measures(r, d["auc"])
    rows, comparisons = [], []
    for (cond, env), vals in sorted(cells.items()):
        base = cells.get((args.baseline, env))
        row = {"condition": cond, "environment": env, **vals}
        for k in MEASURES:
            row[f"delta_{k}"] = vals[k] - base[k] if base else ""
        rows.append(row)
        if base and cond != args.baseline:
            delta = {k: vals[k] - base[k] for k in MEASURES}
            comparisons.append({
                "environment": env, "baseline": args.baseline, "condition": cond,
                "delta": delta,
                "relative": {k: (delta[k] / base[k] if base[k] else None) for k in MEASURES},
                "consistent": bool(np.sign(delta["auc"]) == np.sign(delta["accuracy"]))})
    _record(args, out)
    write_report_csv(rows, out / "grid.csv")
    write_json(comparisons, out / "comparisons.json")
    for row in rows:
        print(f"{row['condition']:>12} {row['environment']:>12}  "
              f"acc {row['accuracy']:.4f}  auc {row['auc']:.4f}")
    return EXIT_OK


def main(argv=None):
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except ArgumentFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_ARGS
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArgumentFailure as exc:
        print(f"reverbaug {args.command}: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ValueError as exc:  # invalid parameter values surface here
        print(f"reverbaug {args.command}: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (ReverbaugError, OSError) as exc:
        print(f"reverbaug {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
