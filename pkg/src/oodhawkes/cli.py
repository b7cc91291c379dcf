"""Command-line entry point: simulate, preprocess, fit, estimate-ate, check-overlap,
evaluate, report and gradcheck.

Configuration is layered: built-in defaults, then an optional JSON file, then
flags.  Every subcommand echoes its resolved configuration to
``resolved-config.json`` under ``--out``.  Exit codes: 0 success, 1 domain
error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .causal import check_overlap, default_covariates, estimate_ate, estimate_propensity, naive_ate
from .config import strict_from_dict, to_plain
from .errors import ConfigError, DataIOError, OODError
from .events import Role, WindowConfig
from .io import read_json, write_json, write_sequences, write_taxonomy
from .sim import GenerationConfig, GroundTruth, TrueIntensity, emit_dataset, example_truth, load_dataset, \
    random_truth, simulate

log = logging.getLogger("oodhawkes.cli")

RESOLVED = "resolved-config.json"


# configuration trees --------------------------------------------------------------

@dataclass
class SimulateConfig:
    n_sequences: int = 100
    horizon: float = 50.0
    example: str | None = None
    example_rate: float = 0.5
    max_events: int = 1_000_000
    generation: GenerationConfig = field(default_factory=GenerationConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "SimulateConfig":
        d = dict(d)
        gen = GenerationConfig.from_dict(d.pop("generation", {}))
        obj = strict_from_dict(cls, d, "simulate")
        obj.generation = gen
        if obj.n_sequences < 1 or not obj.horizon > 0:
            raise ConfigError("simulate: n_sequences must be >= 1 and horizon > 0")
        if obj.example not in (None, "Baseline", "Cause", "Covariate"):
            raise ConfigError("simulate.example must be Baseline, Cause, Covariate or null")
        return obj


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _override(base: dict, **flags: Any) -> dict:
    out = dict(base)
    for k, v in flags.items():
        if v is not None:
            out[k] = v
    return out


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create {out}: {exc.strerror or exc}") from exc
    return out


def _echo(obj: Any) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# subcommands --------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    raw = _load_config_file(args.config)
    raw = _override(raw, n_sequences=args.n_sequences, horizon=args.horizon, example=args.example)
    cfg = SimulateConfig.from_dict(raw)
    if args.truth:
        truth = GroundTruth.from_dict(read_json(args.truth))
        truth = GroundTruth(truth.taxonomy, truth.hawkes, truth.interventions, args.seed, cfg.horizon,
                            truth.true_ate, truth.meta)
    elif cfg.example:
        truth = example_truth(cfg.example, args.seed, cfg.horizon, cfg.example_rate)
    else:
        truth = random_truth(cfg.generation, args.seed, cfg.horizon)
    seqs = simulate(truth, cfg.n_sequences, cfg.horizon, jobs=args.jobs, max_events=cfg.max_events)
    out = _outdir(args.out)
    emit_dataset(seqs, truth, out)
    write_json(out / RESOLVED, {"command": "simulate", "seed": args.seed, "truth_file": args.truth,
                                "config": to_plain(cfg)})
    n = np.array([len(s) for s in seqs])
    log.info("event=simulated n_sequences=%d mean_events=%.3f out=%s", len(seqs), n.mean(), out)
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    from .nn.preprocess import preprocess
    seqs, taxonomy, _ = load_dataset(args.data)
    binned = preprocess(seqs, args.bin_len, args.stride)
    out = _outdir(args.out)
    write_sequences(out / "sequences.jsonl", [b.seq for b in binned])
    write_taxonomy(out / "taxonomy.json", taxonomy)
    write_json(out / "bins.json", [b.to_record() for b in binned])
    write_json(out / RESOLVED, {"command": "preprocess", "data": str(args.data),
                                "bin_len": args.bin_len, "stride": args.stride})
    log.info("event=preprocessed n_in=%d n_out=%d out=%s", len(seqs), len(binned), out)
    return 0


def _intervention_windows(taxonomy, truth: GroundTruth | None, flag: float | None):
    ids = taxonomy.ids(Role.INTERVENTION)
    if flag is not None:
        return float(flag)
    if truth is not None and ids:
        known = {s.intervention_id: s.window for s in truth.interventions}
        if all(k in known for k in ids):
            return [known[k] for k in ids]
    if ids:
        raise ConfigError("--intervention-window is required when the dataset has no truth.json")
    return 1.0


def resolve_fit_config(args: argparse.Namespace, n_event: int, n_inter: int) -> tuple:
    from .nn.model import ModelConfig
    from .nn.train import TrainConfig
    model_raw = _load_config_file(args.model_config)
    train_raw = _load_config_file(args.train_config)
    if args.paper_config:
        base_model = ModelConfig.paper(n_event, n_inter).to_dict()
    else:
        base_model = ModelConfig.desk(n_event, n_inter).to_dict()
    base_model.update(model_raw)
    base_model.update({"n_event_types": n_event, "n_intervention_types": n_inter})
    mcfg = strict_from_dict(ModelConfig, base_model, "model")
    train_raw = _override(train_raw, max_epochs=args.max_epochs)
    train_raw["seed"] = args.seed
    tcfg = strict_from_dict(TrainConfig, train_raw, "train")
    return mcfg, tcfg


def cmd_fit(args: argparse.Namespace) -> int:
    from .nn.checkpoint import save_checkpoint
    from .nn.train import fit, write_history
    seqs, taxonomy, truth = load_dataset(args.data)
    n_event = len(taxonomy.ids(Role.CAUSE, Role.OUTCOME, Role.COVARIATE))
    n_inter = len(taxonomy.ids(Role.INTERVENTION))
    mcfg, tcfg = resolve_fit_config(args, n_event, n_inter)
    wv = _intervention_windows(taxonomy, truth, args.intervention_window)
    out = _outdir(args.out)
    write_json(out / RESOLVED, {"command": "fit", "data": str(args.data), "seed": args.seed,
                                "model": mcfg.to_dict(), "train": to_plain(tcfg),
                                "intervention_window": wv, "time_unit": args.time_unit})
    if args.dry_run:
        return 0
    res = fit(seqs, taxonomy, wv, mcfg, tcfg, out_dir=out, time_unit=args.time_unit)
    save_checkpoint(res.net, out, {"best_epoch": res.best_epoch, "stopped_early": res.stopped_early,
                                   "train_ids": res.train_ids, "val_ids": res.val_ids})
    write_history(out / "history.csv", res.history)
    log.info("event=fitted best_epoch=%d epochs=%d params=%d out=%s", res.best_epoch,
             len(res.history) - 1, res.net.n_parameters, out)
    return 0


def _intensity_provider(spec: str, truth: GroundTruth | None):
    if spec == "oracle":
        if truth is None:
            raise ConfigError("--intensity oracle needs truth.json in the dataset directory")
        return TrueIntensity(truth)
    if spec.startswith("model:"):
        from .nn.checkpoint import load_checkpoint
        from .nn.predict import ModelIntensity
        return ModelIntensity(load_checkpoint(spec[len("model:"):]))
    raise ConfigError(f"--intensity must be 'oracle' or 'model:CKPT_DIR', got {spec!r}")


def _estimation_windows(args, truth: GroundTruth | None) -> WindowConfig:
    w, wv = args.w, args.w_v
    if truth is not None and args.intervention is not None:
        try:
            spec = truth.intervention(args.intervention)
            w = spec.cause_window if w is None else w
            wv = spec.window if wv is None else wv
        except OODError:
            pass
    if w is None:
        raise ConfigError("--w (cause window) is required")
    return WindowConfig(float(w), float(wv if wv is not None else w))


def _propensity(args, seqs, taxonomy, windows):
    cov = args.covariates
    if cov is not None:
        cov = [int(x) for x in cov.split(",") if x.strip()] if cov.strip() else []
    else:
        cov = default_covariates(taxonomy, args.cause, getattr(args, "outcome", None), args.intervention)
    return estimate_propensity(seqs, taxonomy, windows, (args.cause, args.intervention), cov,
                               args.epsilon, args.min_duration)


def _resolve_pair(args: argparse.Namespace, outcome: bool) -> None:
    """Fill --cause/--outcome/--intervention from --pair and check that they are present."""
    pair = getattr(args, "pair", None)
    if pair:
        try:
            ids = [int(x) for x in pair.split(",")]
        except ValueError:
            raise ConfigError(f"--pair must be C,O[,V] integers, got {pair!r}") from None
        if len(ids) not in (2, 3):
            raise ConfigError(f"--pair must be C,O[,V], got {pair!r}")
        for name, val in zip(("cause", "outcome", "intervention"), ids):
            cur = getattr(args, name)
            if cur is not None and cur != val:
                raise ConfigError(f"--pair {pair} disagrees with --{name} {cur}")
            setattr(args, name, val)
    if args.cause is None:
        raise ConfigError("--cause (or --pair) is required")
    if outcome and args.outcome is None:
        raise ConfigError("--outcome (or --pair) is required")


def cmd_estimate_ate(args: argparse.Namespace) -> int:
    _resolve_pair(args, outcome=True)
    seqs, taxonomy, truth = load_dataset(args.data)
    taxonomy.check_role(args.cause, Role.CAUSE, Role.COVARIATE)
    taxonomy.check_role(args.outcome, Role.OUTCOME)
    if args.intervention is not None:
        taxonomy.check_role(args.intervention, Role.INTERVENTION)
    windows = _estimation_windows(args, truth)
    provider = _intensity_provider(args.intensity, truth)
    table = _propensity(args, seqs, taxonomy, windows)
    pair = (args.cause, args.outcome, args.intervention)
    overlap = check_overlap(table, args.epsilon)
    if args.out.endswith(".json"):
        out, ate_name = _outdir(str(Path(args.out).parent)), Path(args.out).name
    else:
        out, ate_name = _outdir(args.out), "ate.json"
    write_json(out / RESOLVED, {"command": "estimate-ate", "data": str(args.data), "pair": list(pair),
                                "windows": {"w": windows.cause_window, "w_v": windows.intervention_window},
                                "intensity": args.intensity, "control": args.control,
                                "grid_dt": args.grid_dt, "epsilon": args.epsilon,
                                "covariates": list(table.covariates), "strict": args.strict})
    if args.strict and not overlap.passed:
        write_json(out / "overlap.json", overlap.to_dict())
        raise ConfigError(f"overlap check failed for {len(overlap.violations)} stratum/arm combinations "
                          f"(see {out / 'overlap.json'})")
    report = estimate_ate(seqs, provider, table, windows, pair, args.grid_dt, args.control)
    doc = report.to_dict()
    doc["naive_unweighted"] = {str(k): v for k, v in
                               naive_ate(seqs, provider, windows, pair, report.grid_dt).items()}
    write_json(out / ate_name, doc)
    _echo({"tau": doc["tau"], "naive": doc["naive"], "overlap_passed": overlap.passed})
    return 0


def cmd_check_overlap(args: argparse.Namespace) -> int:
    _resolve_pair(args, outcome=False)
    seqs, taxonomy, truth = load_dataset(args.data)
    windows = _estimation_windows(args, truth)
    table = _propensity(args, seqs, taxonomy, windows)
    res = check_overlap(table, args.epsilon)
    doc = {"result": res.to_dict(), "propensity": table.to_dict()}
    if args.out:
        out = _outdir(args.out)
        write_json(out / "overlap.json", doc)
        write_json(out / RESOLVED, {"command": "check-overlap", "data": str(args.data),
                                    "cause": args.cause, "intervention": args.intervention,
                                    "windows": {"w": windows.cause_window, "w_v": windows.intervention_window},
                                    "epsilon": args.epsilon, "covariates": list(table.covariates)})
    _echo(res.to_dict())
    if not res.passed and args.strict:
        log.error("event=overlap_failed violations=%d", len(res.violations))
        return 1
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .evaluation import ExperimentConfig, run_experiment
    preset = "paper" if args.paper_scale else "desk"
    base = ExperimentConfig.preset_config(args.plan, preset).to_dict()
    raw = _load_config_file(args.config)
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            base[k] = {**base[k], **v}
        else:
            base[k] = v
    base = _override(base, reps=args.reps, n_sequences=args.n_sequences)
    base.update({"plan": args.plan, "preset": preset, "master_seed": args.seed})
    if args.no_fit:
        base["fit_model"] = False
    if args.confounded:
        base["confounded"] = True
    cfg = ExperimentConfig.from_dict(base)
    out = _outdir(args.out)
    write_json(out / RESOLVED, {"command": "evaluate", "experiment": cfg.to_dict(), "jobs": args.jobs})
    summary = run_experiment(cfg, out, jobs=args.jobs)
    sys.stdout.write((out / "table.txt").read_text())
    if summary["incomplete"]:
        log.warning("event=incomplete_reps reps=%s", summary["incomplete"])
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .evaluation import load_results, render_table, summarize
    results = load_results(args.results)
    summary = summarize(results)
    exp_path = Path(args.results) / "experiment.json"
    if exp_path.exists():
        exp = read_json(exp_path)
        summary.update({"plan": exp.get("plan"), "preset": exp.get("preset"),
                        "master_seed": exp.get("master_seed")})
    text = render_table(summary)
    sys.stdout.write(text)
    if args.out:
        out = _outdir(args.out)
        (out / "table.txt").write_text(text)
        write_json(out / "summary.json", summary)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    from .nn.gradcheck import grad_check, toy_network
    net, batch = toy_network(args.seed, causal_cnn=not args.symmetric_cnn)
    res = grad_check(net, batch, args.epsilon)
    doc = res.to_dict()
    doc["tolerance"] = args.tolerance
    doc["passed"] = bool(res.max_rel_error <= args.tolerance)
    if args.out:
        out = _outdir(args.out)
        write_json(out / "gradcheck.json", doc)
    _echo({k: doc[k] for k in ("max_rel_error", "worst_param", "n_coords", "passed")})
    return 0 if doc["passed"] else 1


# parser --------------------------------------------------------------------------------

class KeyValueFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        msg = record.getMessage()
        if "=" not in msg.split(" ", 1)[0]:
            msg = f"msg={json.dumps(msg)}"
        return f"level={record.levelname} logger={record.name} {msg}"


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(KeyValueFormatter())
    root = logging.getLogger("oodhawkes")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def _add_pair_args(p: argparse.ArgumentParser, outcome: bool) -> None:
    p.add_argument("--data", required=True, help="dataset directory (sequences.jsonl, taxonomy.json)")
    p.add_argument("--cause", type=int, default=None, help="cause type id")
    if outcome:
        p.add_argument("--outcome", type=int, default=None, help="outcome type id")
        p.add_argument("--pair", default=None, help="shorthand for C,O[,V] (cause, outcome, intervention)")
    p.add_argument("--intervention", type=int, default=None, help="intervention type id")
    p.add_argument("--w", "--window", dest="w", type=float, default=None,
                   help="cause window (default: from truth.json)")
    p.add_argument("--w-v", "--wv", dest="w_v", type=float, default=None,
                   help="intervention window (default: from truth.json)")
    p.add_argument("--covariates", default=None,
                   help="comma-separated covariate type ids (default: every other cause/covariate type)")
    p.add_argument("--epsilon", type=float, default=0.01, help="propensity clipping / overlap threshold")
    p.add_argument("--min-duration", type=float, default=0.0,
                   help="strata shorter than this fall back to the pooled propensity")
    p.add_argument("--strict", action="store_true", help="fail (exit 1) when the overlap check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oodhawkes", description=__doc__.split("\n\n")[0])
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a random or example DGP")
    p.add_argument("--config", help="JSON simulation config")
    p.add_argument("--truth", help="simulate from an existing truth.json instead")
    p.add_argument("--example", choices=["Baseline", "Cause", "Covariate"], default=None)
    p.add_argument("--n-sequences", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="temporal binning into rescaled overlapping subsequences")
    p.add_argument("--data", required=True)
    p.add_argument("--bin-len", type=int, default=400)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="train the neural intensity model")
    p.add_argument("--data", required=True)
    p.add_argument("--model-config", help="JSON model config overrides")
    p.add_argument("--train-config", help="JSON training config overrides")
    p.add_argument("--paper-config", action="store_true", help="start from the full-size model preset")
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--intervention-window", type=float, default=None,
                   help="window for the intervention bit-vector (default: per type from truth.json)")
    p.add_argument("--time-unit", type=float, default=1.0, help="data time units per model time unit")
    p.add_argument("--dry-run", action="store_true", help="only write resolved-config.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate-ate", help="IPW estimate of tau(0), tau(1)")
    _add_pair_args(p, outcome=True)
    p.add_argument("--intensity", default="oracle", help="'oracle' or 'model:CKPT_DIR'")
    p.add_argument("--control", choices=["joint", "complement"], default="joint",
                   help="control-arm weight: 1/P(c=0,v|x) (joint) or 1/(1-P(c=1,v|x)) (complement)")
    p.add_argument("--grid-dt", type=float, default=None)
    p.add_argument("--out", required=True, help="output directory, or a path ending in .json for the report")
    p.set_defaults(func=cmd_estimate_ate)

    p = sub.add_parser("check-overlap", help="propensity overlap diagnostics")
    _add_pair_args(p, outcome=False)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_overlap)

    p = sub.add_parser("evaluate", help="repeated simulate -> fit -> estimate runs")
    p.add_argument("--plan", choices=["no-ood", "baseline", "all-impact"], required=True)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n-sequences", type=int, default=None)
    p.add_argument("--config", help="JSON experiment config overrides")
    p.add_argument("--paper-scale", action="store_true", help="1000 sequences, 30 types, 30 interventions")
    p.add_argument("--no-fit", action="store_true", help="oracle intensity only (skip model fitting)")
    p.add_argument("--confounded", action="store_true", help="add a shared parent to the first pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-aggregate an evaluate output directory")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gradcheck", help="central-difference audit of the model gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--symmetric-cnn", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    try:
        return int(args.func(args))
    except DataIOError as exc:
        log.error("event=io_error error=%s", json.dumps(str(exc)))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OODError as exc:
        log.error("event=domain_error error=%s", json.dumps(str(exc)))
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
