"""``costuplift`` command line: gen-synth, prep, train, eval, sweep.

Exit codes: 0 success, 2 config/validation, 3 data/shape, 4 numeric
failure, 5 every sweep member failed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .constrained import ConstraintSpec
from .data import (
    Schema,
    SyntheticSpec,
    gen_synthetic,
    load_csv,
    prep_covertype,
    prep_us_census,
    split_dataset,
    write_csv,
)
from .drm import TrainConfig
from .errors import ConfigError, CostUpliftError, ShapeError, SweepError, ValidationError
from .evaluation import compare_models, evaluate_scores
from .models import MODEL_KINDS, FittedModel, fit_model
from .rlearner import DEFAULT_LAMBDA_GRID

logger = logging.getLogger("costuplift")


@dataclass
class RunConfig:
    data: Optional[str] = None
    schema: Optional[dict] = None
    model: str = "drm"
    models: list = field(default_factory=lambda: list(MODEL_KINDS))
    train: dict = field(default_factory=dict)
    constraint: dict = field(default_factory=dict)
    lambda_grid: list = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    reg_weight: float = 0.0
    mean_strategy: str = "pooled"
    split: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    seed: int = 0
    benchmark: str = "duality"

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_config(self) -> TrainConfig:
        d = {"seed": self.seed, **self.train}
        return TrainConfig.from_dict(d)

    def constraint_spec(self) -> ConstraintSpec:
        return ConstraintSpec.from_dict(self.constraint) if self.constraint else ConstraintSpec()

    def schema_obj(self) -> Schema:
        return Schema.from_dict(self.schema) if self.schema else Schema()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg_digest: str, seed: int, names):
    files = {n: _sha256(out / n) for n in sorted(names)}
    _write_json(out / "manifest.json", {"config_digest": cfg_digest, "seed": seed, "files": files})


def _parse_floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{what} expects comma-separated numbers, got {text!r}") from None


def _run_config(args) -> RunConfig:
    base = _read_json(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig.from_dict(base)
    if getattr(args, "data", None):
        cfg.data = args.data
    if getattr(args, "schema", None):
        cfg.schema = _read_json(args.schema)
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "models", None) is not None:
        cfg.models = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "grid", None):
        cfg.lambda_grid = _parse_floats(args.grid, "grid")
    if getattr(args, "split", None):
        cfg.split = _parse_floats(args.split, "split")
    if getattr(args, "benchmark", None):
        cfg.benchmark = args.benchmark
    if cfg.data is None:
        raise ConfigError("no dataset given (--data or 'data' in --config)")
    return cfg


def _train_one(kind, ds, split, cfg: RunConfig, out: Path, digest: str):
    fitted, trace = fit_model(kind, ds, split, cfg.train_config(), cfg.constraint_spec(),
                              cfg.lambda_grid, cfg.reg_weight, cfg.mean_strategy)
    out.mkdir(parents=True, exist_ok=True)
    artifact = {
        "config_digest": digest,
        "seed": cfg.seed,
        "run_config": {**cfg.to_dict(), "model": kind},
        **fitted.to_dict(),
    }
    _write_json(out / "model.json", artifact)
    names = ["model.json"]
    if trace is not None:
        trace.to_csv(out / "trace.csv")
        names.append("trace.csv")
    return fitted, names


def _evaluate(fitted: FittedModel, rows, model_id, random_seed=None):
    if rows.d != fitted.d:
        raise ShapeError(f"model expects {fitted.d} features, dataset has {rows.d}")
    if random_seed is not None:
        scores = np.random.default_rng(random_seed).random(rows.n)
    else:
        scores = fitted.score(rows.features)
    return evaluate_scores(scores, rows.treatment, rows.gain, rows.cost, model_id=model_id)


def _write_report(out: Path, report, digest, seed, extra=None):
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", {"config_digest": digest, "seed": seed, **report.to_dict(), **(extra or {})})
    report.curve.to_csv(out / "curve.csv")
    return ["report.json", "curve.csv"]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_synth(args):
    spec = SyntheticSpec.from_json(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    ds, tau_r, tau_c = gen_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / "dataset.csv")
    with open(out / "oracle.csv", "w") as fh:
        fh.write("id,tau_gain,tau_cost\n")
        for i, a, b in zip(ds.ids, tau_r, tau_c):
            fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
    digest = hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
    _write_manifest(out, digest, spec.seed, ["dataset.csv", "oracle.csv"])
    print(f"N={ds.n} d={ds.d} treated_fraction={ds.treated_fraction!r}")
    return 0


def cmd_prep(args):
    if args.recipe == "covertype":
        ds, report = prep_covertype(args.raw)
    else:
        ds, report = prep_us_census(args.raw)
    write_csv(ds, args.out)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_train(args):
    cfg = _run_config(args)
    if cfg.model not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {cfg.model!r}; expected one of {MODEL_KINDS}")
    ds = load_csv(cfg.data, cfg.schema_obj())
    split = split_dataset(ds, cfg.split, cfg.seed)
    out = Path(args.out)
    digest = cfg.digest()
    fitted, names = _train_one(cfg.model, ds, split, cfg, out, digest)
    _write_manifest(out, digest, cfg.seed, names)
    va = fitted.info.get("validation_aucc")
    lam = fitted.info.get("lambda")
    print(f"model={cfg.model} validation_aucc={va!r}" + (f" lambda={lam!r}" if lam is not None else ""))
    return 0


def cmd_eval(args):
    artifact = _read_json(args.model)
    fitted = FittedModel.from_dict(artifact)
    stored = RunConfig.from_dict(artifact.get("run_config", {}))
    if args.data:
        stored.data = args.data
    if args.schema:
        stored.schema = _read_json(args.schema)
    if args.split:
        stored.split = _parse_floats(args.split, "split")
    if args.seed is not None:
        stored.seed = args.seed
    if stored.data is None:
        raise ConfigError("no dataset given (--data)")
    ds = load_csv(stored.data, stored.schema_obj())
    split = split_dataset(ds, stored.split, stored.seed)
    part = {"train": split.train, "validation": split.validation, "test": split.test}[args.part]
    rows = ds.subset(part)
    model_id = "random" if args.random_baseline else fitted.kind
    report = _evaluate(fitted, rows, model_id, stored.seed if args.random_baseline else None)
    out = Path(args.out)
    digest = stored.digest()
    names = _write_report(out, report, digest, stored.seed, {"part": args.part})
    _write_manifest(out, digest, stored.seed, names)
    print(f"model={model_id} part={args.part} aucc={report.aucc!r}")
    return 0


def cmd_sweep(args):
    cfg = _run_config(args)
    if not cfg.models:
        raise ConfigError("no model kinds given")
    bad = [m for m in cfg.models if m not in MODEL_KINDS]
    if bad:
        raise ConfigError(f"unknown model kinds {bad}; expected a subset of {MODEL_KINDS}")
    ds = load_csv(cfg.data, cfg.schema_obj())
    split = split_dataset(ds, cfg.split, cfg.seed)
    test = ds.subset(split.test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    reports, failures = [], {}
    for kind in cfg.models:
        sub = out / kind
        try:
            fitted, names = _train_one(kind, ds, split, cfg, sub, digest)
            report = _evaluate(fitted, test, kind)
            names += _write_report(sub, report, digest, cfg.seed, {"part": "test"})
            _write_manifest(sub, digest, cfg.seed, names)
            reports.append(report)
        except CostUpliftError as exc:
            logger.error("%s failed: %s", kind, exc)
            failures[kind] = str(exc)
    if not reports:
        raise SweepError(f"every model failed: {failures}")
    table = compare_models(reports, benchmark=cfg.benchmark, include_random=True, failures=failures)
    _write_json(out / "comparison.json", {"config_digest": digest, "seed": cfg.seed, **table.to_dict()})
    (out / "comparison.txt").write_text(table.to_text())
    _write_manifest(out, digest, cfg.seed, ["comparison.json", "comparison.txt"])
    sys.stdout.write(table.to_text())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="costuplift", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", help="generate a synthetic experiment and its true effects")
    g.add_argument("--spec", "--config", dest="spec", required=True, help="synthetic spec JSON")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen_synth)

    pr = sub.add_parser("prep", help="build an experiment CSV from a public raw extract")
    pr.add_argument("recipe", choices=["covertype", "us_census"])
    pr.add_argument("--raw", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_prep)

    def common(sp):
        sp.add_argument("--data")
        sp.add_argument("--schema", help="schema JSON")
        sp.add_argument("--config", help="run config JSON")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--split", help="train,validation,test fractions (default 0.6,0.2,0.2)")
        sp.add_argument("--grid", help="comma-separated lambda grid for duality")
        sp.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train one model kind")
    common(t)
    t.add_argument("--model", choices=MODEL_KINDS)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a split with a trained model")
    e.add_argument("--model", required=True, help="model.json from train")
    e.add_argument("--data")
    e.add_argument("--schema")
    e.add_argument("--seed", type=int)
    e.add_argument("--split")
    e.add_argument("--part", choices=["train", "validation", "test"], default="test")
    e.add_argument("--random-baseline", action="store_true", help="score with seeded uniform noise")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="train and compare several model kinds")
    common(s)
    s.add_argument("--models", help="comma-separated model kinds")
    s.add_argument("--benchmark")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CostUpliftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
