"""Command-line pipeline: gen, train, attack, report, eval.

Every command reads and writes inside ``--out``. A ``manifest.json`` there
records, for each artifact, its sha256, producing stage, config hash and
lineage; JSON artifacts also embed their config hash directly. Commands refuse
inputs whose recorded lineage disagrees with the current config or with each
other.

Exit codes: 0 ok, 2 config error, 3 compatibility error, 4 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .attack import AttackContext, GreedyStrategy, RandomStrategy
from .attack.evaluation import evaluate_cases, summarize
from .cohortgen import gen_cohort, gen_ontology, split_cohort, stable_hash
from .config import RunConfig
from .errors import CompatibilityError, ConfigError, EHRAttackError, UnknownCode
from .metrics import PredictionSet, metric_report
from .ontology import build_cooccurrence, load_ontology, ontology_tsv
from .records import Cohort, cohort_lines, read_cohort
from .report import frequency_tables, parse_action_log
from .similarity import OntologyHashEncoder
from .victim import Vocabulary, load_model, model_to_dict, train_victim

EXIT_OK, EXIT_CONFIG, EXIT_COMPAT, EXIT_DATA = 0, 2, 3, 4
MANIFEST = "manifest.json"


# -- artifact plumbing -------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


class Workspace:
    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        path = root / MANIFEST
        if path.exists():
            try:
                self.manifest = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                raise CompatibilityError(f"{path} is not valid JSON") from None
        else:
            self.manifest = {"files": {}}

    def path(self, name: str) -> Path:
        return self.root / name

    def write(self, name: str, text: str, stage: str, config_hash: str, lineage: dict):
        data = text.encode("utf-8")
        self.path(name).write_bytes(data)
        self.manifest["files"][name] = {
            "sha256": hashlib.sha256(data).hexdigest(),
            "stage": stage,
            "config_hash": config_hash,
            "lineage": lineage,
        }

    def save(self):
        self.manifest["files"] = dict(sorted(self.manifest["files"].items()))
        self.path(MANIFEST).write_text(_dump_json(self.manifest), encoding="utf-8")

    def entry(self, name: str) -> dict:
        """Manifest entry for an input artifact, after checking the file is unmodified."""
        path = self.path(name)
        if not path.exists():
            raise FileNotFoundError(f"missing input artifact: {path}")
        entry = self.manifest["files"].get(name)
        if entry is None:
            raise CompatibilityError(f"{name} is not recorded in {MANIFEST}")
        if hashlib.sha256(path.read_bytes()).hexdigest() != entry["sha256"]:
            raise CompatibilityError(f"{name} was modified after it was produced")
        return entry

    def first_existing(self, *names: str) -> str:
        for n in names:
            if self.path(n).exists():
                return n
        raise FileNotFoundError(f"none of {', '.join(names)} found in {self.root}")


def _require_gen(entry: dict, config: RunConfig, name: str):
    if entry["lineage"].get("gen") != config.lineage()["gen"]:
        raise CompatibilityError(
            f"{name} was generated under a different gen config or seed; refusing to mix")


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        config = config.with_seed(args.seed)
    if args.workers is not None:
        config = config.replace(run={"workers": args.workers})
    return config


# -- commands ----------------------------------------------------------------

def cmd_gen(args, config: RunConfig, ws: Workspace) -> int:
    lineage = {"gen": config.lineage()["gen"]}
    h = config.config_hash()
    ontology = gen_ontology(config.gen)
    cohort, truth = gen_cohort(config.gen, ontology)
    ws.write("ontology.tsv", ontology_tsv(ontology), "gen", h, lineage)
    ws.write("cohort.jsonl", cohort_lines(cohort), "gen", h, lineage)
    ws.write("groundtruth.json", _dump_json({"config_hash": h, "lineage": lineage,
                                              **truth.to_dict()}), "gen", h, lineage)
    if args.split:
        train, target = split_cohort(cohort, config.gen.n_target, config.gen.seed)
        ws.write("train.jsonl", cohort_lines(train), "gen", h, lineage)
        ws.write("target.jsonl", cohort_lines(target), "gen", h, lineage)
    ws.manifest["config"] = config.to_dict()
    ws.manifest["config_hash"] = h
    ws.save()
    return EXIT_OK


def cmd_train(args, config: RunConfig, ws: Workspace) -> int:
    if args.kind:
        config = config.replace(victim={"kind": args.kind})
    name = ws.first_existing("train.jsonl", "cohort.jsonl")
    _require_gen(ws.entry(name), config, name)
    ont_entry = ws.entry("ontology.tsv")
    _require_gen(ont_entry, config, "ontology.tsv")
    cohort = read_cohort(ws.path(name))
    ontology = load_ontology(ws.path("ontology.tsv"))
    # the victim's vocabulary is every leaf, so target-set codes unseen in training still featurize
    vocab = Vocabulary(tuple(ontology.sorted_leaves()))
    model, report = train_victim(cohort, config.victim, vocab=vocab)
    lineage = {k: v for k, v in config.lineage().items() if k in ("gen", "train")}
    h = config.config_hash()
    meta = {"config_hash": h, "lineage": lineage, "victim_config": config.to_dict()["victim"],
            "trained_on": name}
    ws.write("model.json", _dump_json({**model_to_dict(model), **meta}), "train", h, lineage)
    ws.write("training_report.json", _dump_json({**report.to_dict(), **meta}), "train", h,
             lineage)
    ws.save()
    return EXIT_OK


def _load_victim(ws: Workspace, config: RunConfig):
    entry = ws.entry("model.json")
    _require_gen(entry, config, "model.json")
    return load_model(ws.path("model.json")), entry["lineage"]


def _check_vocabulary(cohort: Cohort, model):
    drift = sorted(set(cohort.vocabulary()) - set(model.vocab.codes))
    if drift:
        raise CompatibilityError(
            f"cohort uses {len(drift)} codes unknown to the victim (first: {drift[0]})")


def cmd_attack(args, config: RunConfig, ws: Workspace) -> int:
    overrides = {}
    if args.attacker:
        overrides["attacker"] = args.attacker
    if args.budget is not None:
        overrides["budget"] = args.budget
    config = config.replace(run=overrides)
    attack_over = {}
    if args.lam is not None:
        attack_over["lam"] = args.lam
    if config.run.attacker == "nosym":
        attack_over["lam"] = 0.0
    if args.budget is not None and config.run.attacker != "random":
        attack_over["max_actions"] = args.budget
    config = config.replace(attack=attack_over)

    victim, model_lineage = _load_victim(ws, config)
    target_name = ws.first_existing("target.jsonl", "cohort.jsonl")
    train_name = ws.first_existing("train.jsonl", "cohort.jsonl")
    for name in sorted({target_name, train_name, "ontology.tsv"}):
        _require_gen(ws.entry(name), config, name)
    target = read_cohort(ws.path(target_name))
    train = read_cohort(ws.path(train_name))
    ontology = load_ontology(ws.path("ontology.tsv"))
    _check_vocabulary(target, victim)

    table = build_cooccurrence(train, config.cooccurrence.scope, config.cooccurrence.direction)
    context = AttackContext(ontology, table, OntologyHashEncoder(ontology, config.encoder),
                            config.attack.p)
    if config.run.attacker == "random":
        strategy = RandomStrategy(victim, context, config.attack, config.run.budget)
    else:
        strategy = GreedyStrategy(victim, context, config.attack)
    evaluation = evaluate_cases(target, victim, strategy, config.attack,
                                workers=config.run.workers)

    d = config.to_dict()
    lineage = {"gen": model_lineage["gen"], "train": model_lineage["train"],
               "attack": stable_hash([model_lineage["train"], d["encoder"], d["attack"],
                                      d["cooccurrence"], d["run"]])}
    h = config.config_hash()
    log = evaluation.full.log_entries(list(evaluation.full.results))
    actions = "".join(json.dumps(e.to_dict(), separators=(",", ":")) + "\n" for e in log)
    summary = {"attacker": config.run.attacker, "config": d, "config_hash": h,
               "lineage": lineage, "target_file": target_name,
               **summarize(evaluation, target)}
    ws.write("actions.jsonl", actions, "attack", h, lineage)
    ws.write("adversarial_cohort.jsonl", cohort_lines(evaluation.full.adversarial), "attack",
             h, lineage)
    ws.write("summary.json", _dump_json(summary), "attack", h, lineage)
    ws.save()
    return EXIT_OK


def cmd_report(args, config: RunConfig, ws: Workspace) -> int:
    actions_name = args.actions or "actions.jsonl"
    # parse first: a malformed log is a data error even if it was also modified
    with open(ws.path(actions_name), encoding="utf-8") as fh:
        entries = parse_action_log(fh)
    entry = ws.entry(actions_name)
    cohort_name = args.cohort or ws.first_existing("target.jsonl", "cohort.jsonl")
    cohort_entry = ws.entry(cohort_name)
    if entry["lineage"].get("gen") != cohort_entry["lineage"].get("gen"):
        raise CompatibilityError(f"{actions_name} and {cohort_name} come from different runs")
    cohort = read_cohort(ws.path(cohort_name))
    for name, text in frequency_tables(entries, cohort).items():
        ws.write(name, text, "report", entry["config_hash"], entry["lineage"])
    ws.save()
    return EXIT_OK


def cmd_eval(args, config: RunConfig, ws: Workspace) -> int:
    victim, model_lineage = _load_victim(ws, config)
    cohort_name = args.cohort or ws.first_existing("target.jsonl", "cohort.jsonl")
    entry = ws.entry(cohort_name)
    if entry["lineage"].get("gen") != model_lineage["gen"]:
        raise CompatibilityError(f"{cohort_name} and model.json come from different runs")
    cohort = read_cohort(ws.path(cohort_name))
    _check_vocabulary(cohort, victim)
    h = entry["config_hash"]
    preds = PredictionSet.from_patients(cohort.patients,
                                        [victim.predict_time(p.record) for p in cohort])
    report = {"cohort": cohort_name, "config_hash": h, "lineage": entry["lineage"],
              "n_patients": len(cohort), **metric_report(preds)}
    out = f"eval_{Path(cohort_name).stem}.json"
    ws.write(out, _dump_json(report), "eval", h, entry["lineage"])
    ws.save()
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS lets the global flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run config (unknown keys are rejected)")
    common.add_argument("--seed", type=int, help="overrides every stage's seed")
    common.add_argument("--out", help="artifact directory (default: .)")
    common.add_argument("--workers", type=int, help="processes for the censored attack step")

    parser = argparse.ArgumentParser(prog="ehrattack", parents=[common],
                                     description="Adversarial attacks on survival models "
                                                 "over synthetic coded-visit cohorts.")
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen", parents=[common], help="generate ontology and cohort")
    g.add_argument("--split", action="store_true",
                   help="also write disjoint train.jsonl and target.jsonl")
    t = sub.add_parser("train", parents=[common], help="train a victim model")
    t.add_argument("--kind", choices=("exponential", "discrete"))
    a = sub.add_parser("attack", parents=[common], help="attack the target cohort")
    a.add_argument("--attacker", choices=("survattack", "nosym", "random"))
    a.add_argument("--budget", type=int, help="per-patient kept-action budget")
    a.add_argument("--lambda", dest="lam", type=float, help="similarity weight in the score")
    r = sub.add_parser("report", parents=[common], help="frequency tables from an action log")
    r.add_argument("--actions", help="action log inside --out (default: actions.jsonl)")
    r.add_argument("--cohort", help="cohort file inside --out (default: target cohort)")
    e = sub.add_parser("eval", parents=[common], help="c-index and MAE of the victim")
    e.add_argument("--cohort", help="cohort file inside --out (default: target cohort)")
    return parser


GLOBAL_DEFAULTS = {"config": None, "seed": None, "out": ".", "workers": None}

COMMANDS = {"gen": cmd_gen, "train": cmd_train, "attack": cmd_attack,
            "report": cmd_report, "eval": cmd_eval}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        config = _load_config(args)
        ws = Workspace(Path(args.out))
        return COMMANDS[args.command](args, config, ws)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CompatibilityError, UnknownCode) as exc:
        print(f"compatibility error: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except (EHRAttackError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
