"""Stage-wise command line interface.

Output directory layout::

    <out>/configs/run.json        resolved run configuration
    <out>/cohort.jsonl            patient records
    <out>/profiles/               per-modality profile texts + manifest.json
    <out>/reports/cache/          curator report cache (one JSON per key)
    <out>/reports/reports.jsonl   validated reports, one per (patient, modality)
    <out>/embeddings/             vector cache (.npy + manifest.json)
    <out>/matrices/               exported design matrices (TSV)
    <out>/results/                records, summaries, comparison tables

Each command checks for the artifacts it needs and names the stage to run
when something is missing.  Errors are printed to stderr as one JSON object
and the process exits nonzero.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cohort import MODALITIES, Modality, labels, read_cohort, write_cohort
from .curation import (
    CuratorReport,
    DecodingParams,
    ExternalCurator,
    ReportCache,
    ReportStore,
    curate_corpus,
    load_templates,
)
from .embedding import EmbeddingCache, ExternalEmbedder, GroupSpan, MockEmbedder, TaskHint
from .evaluation import (
    DEFAULT_GRIDS,
    GRID_VERSION,
    TooFewPairsError,
    attribute_cv,
    compare_records,
    make_cv_plan,
    read_records,
    run_ablation,
    run_cv,
    summarize_records,
    write_records,
    write_summary,
)
from .evaluation.results import canonical_json, comparison_table
from .features import (
    EnfFactory,
    MissingArtifactError,
    PrecomputedFactory,
    Strategy,
    assemble_matrix,
    subset_name,
    text_matrix,
    write_matrix,
)
from .knowledge import load_knowledge_base
from .learn import ModelKind
from .mock_curator import MockCurator
from .profiles import dump_profiles, load_profiles, profile_corpus
from .synthetic import SyntheticConfig, generate_synthetic_cohort

LOCK_NAME = ".gkc.lock"
STAGES = ("synth", "profiles", "curate", "embed", "eval", "ablate", "attribute", "compare")


class CliError(Exception):
    exit_code = 1

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class MissingStageError(CliError):
    exit_code = 2


class LockedError(CliError):
    exit_code = 3


@dataclass
class RunConfig:
    cohort_path: str | None = None
    synthetic: dict = field(default_factory=lambda: dataclasses.asdict(SyntheticConfig()))
    knowledge_base: str | None = None
    curator: str = "mock"
    embedder: str = "mock"
    dim: int = 256
    strict_schema: bool = False
    strategies: list = field(default_factory=lambda: ["ENF", "CTE", "GKC"])
    model: str = "GradBoost"
    grid: dict | None = None
    grid_version: str = GRID_VERSION
    cv_seed: int = 7
    n_repeats: int = 10
    n_folds: int = 5
    bootstrap_seed: int = 0
    n_permutations: int = 20

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise CliError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def grid_for(self) -> dict:
        return self.grid if self.grid is not None else DEFAULT_GRIDS[ModelKind.parse(self.model)]


# ---------------------------------------------------------------- helpers

class Layout:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def __getattr__(self, name):
        dirs = {"configs", "profiles", "reports", "embeddings", "matrices", "results"}
        if name in dirs:
            return self.root / name
        raise AttributeError(name)

    @property
    def config(self):
        return self.root / "configs" / "run.json"

    @property
    def cohort(self):
        return self.root / "cohort.jsonl"

    @property
    def reports_index(self):
        return self.root / "reports" / "reports.jsonl"


class DirLock:
    """Exclusive lock file; a second invocation on the same directory fails."""

    def __init__(self, root: Path):
        self.path = root / LOCK_NAME

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockedError(f"output directory is locked by another run ({self.path})",
                              lock=str(self.path)) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


class Partial:
    """Marks a stage's output as partial until the stage finishes."""

    def __init__(self, lay: Layout, stage: str):
        self.path = lay.root / f"{stage}.PARTIAL"

    def __enter__(self):
        self.path.write_text("stage did not complete; outputs may be incomplete\n")
        return self

    def __exit__(self, exc_type, *rest):
        if exc_type is None:
            self.path.unlink(missing_ok=True)


def _require(path: Path, stage: str, what: str):
    if not path.exists():
        raise MissingStageError(f"missing {what} ({path}); run '{stage}' first",
                                missing=str(path), stage=stage)


def _load_config(lay: Layout) -> RunConfig:
    _require(lay.config, "synth", "run configuration")
    return RunConfig.from_dict(json.loads(lay.config.read_text(encoding="utf-8")))


def _save_config(lay: Layout, cfg: RunConfig):
    lay.configs.mkdir(parents=True, exist_ok=True)
    lay.config.write_text(canonical_json(dataclasses.asdict(cfg)), encoding="utf-8")


def _kb(cfg: RunConfig):
    return load_knowledge_base(cfg.knowledge_base)


def _cohort(lay: Layout):
    _require(lay.cohort, "synth", "cohort")
    return read_cohort(lay.cohort)


def _curator(name: str):
    if name == "mock":
        return MockCurator()
    if name == "external":
        return ExternalCurator()
    raise CliError(f"unknown curator provider {name!r}")


def _embedder(cfg: RunConfig):
    if cfg.embedder == "mock":
        return MockEmbedder(cfg.dim)
    if cfg.embedder == "external":
        return ExternalEmbedder()
    raise CliError(f"unknown embedder {cfg.embedder!r}")


class CacheOnlyEmbedder:
    """Stands in for the configured embedder when only cached vectors may be used."""

    deterministic = True

    def __init__(self, name: str):
        self.name = name

    def embed(self, text, task_hint=TaskHint.CLASSIFICATION):
        raise MissingStageError("embedding not found in cache; run 'embed' first",
                                stage="embed")


def _embedder_name(cfg: RunConfig) -> str:
    if cfg.embedder == "mock":
        return MockEmbedder(cfg.dim).name
    return f"external:{os.environ.get('GKC_EMBEDDER_MODEL', 'default')}"


def _load_reports(lay: Layout) -> ReportStore:
    _require(lay.reports_index, "curate", "curator reports")
    store = ReportStore()
    for line in lay.reports_index.read_text(encoding="utf-8").splitlines():
        row = json.loads(line)
        store.reports[(row["patient_id"], Modality.parse(row["modality"]))] = \
            CuratorReport.from_dict(row["report"])
    return store


def _source(lay: Layout, strategy: Strategy):
    if strategy is Strategy.CTE:
        _require(lay.profiles / "manifest.json", "profiles", "profiles")
        return load_profiles(lay.profiles)
    return _load_reports(lay)


def _factory(lay: Layout, cfg: RunConfig, strategy, subset, cohort, kb):
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.ENF:
        return EnfFactory(cohort, kb.classes.class_ids, subset)
    _require(lay.embeddings / "manifest.json", "embed", "embeddings")
    cache = EmbeddingCache(lay.embeddings)
    X, spans = text_matrix(cohort, strategy, subset, _source(lay, strategy),
                           CacheOnlyEmbedder(_embedder_name(cfg)), cache)
    return PrecomputedFactory(X, spans)


def _summary_block(records, cfg: RunConfig) -> dict:
    s = summarize_records(records, seed=cfg.bootstrap_seed)
    return {m: dataclasses.asdict(v) for m, v in s.items()}


def _compare_or_none(a, b, metric="auc_roc") -> dict:
    """Wilcoxon result as a dict; too few nonzero pairs yields an explanatory stub."""
    try:
        return dataclasses.asdict(compare_records(a, b, metric))
    except TooFewPairsError as exc:
        return {"p_value": None, "reason": str(exc)}


def _stats_line(lay: Layout, name: str, stats: dict):
    path = lay.root / name
    path.write_text(canonical_json(stats), encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_synth(args, lay: Layout):
    cfg = _base_config(args, lay, fresh=True)
    kb = _kb(cfg)
    if args.cohort:
        cohort = read_cohort(args.cohort)
        cfg.cohort_path = str(Path(args.cohort).resolve())
    else:
        syn = dict(cfg.synthetic)
        for key in ("n_patients", "planted_signal_strength", "noise_profile_tokens",
                    "prevalence_target"):
            v = getattr(args, key, None)
            if v is not None:
                syn[key] = v
        if args.seed is not None:
            syn["seed"] = args.seed
        syn["modality_weights"] = tuple(syn["modality_weights"])
        sc = SyntheticConfig(**syn)
        cfg.synthetic = {**dataclasses.asdict(sc), "modality_weights": list(sc.modality_weights)}
        cohort = generate_synthetic_cohort(sc, kb).patients
    _save_config(lay, cfg)
    write_cohort(lay.cohort, cohort)
    y = labels(cohort)
    return {"patients": len(cohort), "positives": int(y.sum())}


def cmd_profiles(args, lay: Layout):
    cfg = _load_config(lay)
    kb = _kb(cfg)
    cohort = _cohort(lay)
    with Partial(lay, "profiles"):
        corpus = profile_corpus(cohort, kb)
        dump_profiles(corpus, lay.profiles)
    return {"profiles": len(corpus)}


def cmd_curate(args, lay: Layout):
    cfg = _load_config(lay)
    if args.provider:
        cfg.curator = args.provider
    if args.strict_schema:
        cfg.strict_schema = True
    _save_config(lay, cfg)
    _require(lay.profiles / "manifest.json", "profiles", "profiles")
    corpus = load_profiles(lay.profiles)
    provider = _curator(cfg.curator)
    cache = ReportCache(lay.reports / "cache")
    with Partial(lay, "curate"):
        store = curate_corpus(provider, corpus, load_templates(), DecodingParams(), cache,
                              strict=cfg.strict_schema, max_in_flight=args.max_in_flight)
        lines = []
        for (pid, m) in sorted(store.reports, key=lambda k: (k[0], k[1])):
            lines.append(json.dumps({"patient_id": pid, "modality": m.name.lower(),
                                     "report": store.reports[(pid, m)].to_dict()},
                                    sort_keys=True))
        lay.reports_index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    stats = {"provider": provider.name, "provider_calls": provider.calls,
             "reports": len(store)}
    _stats_line(lay, "reports/curation_stats.json", stats)
    return stats


def cmd_embed(args, lay: Layout):
    cfg = _load_config(lay)
    if args.embedder:
        cfg.embedder = args.embedder
    if args.dim:
        cfg.dim = args.dim
    _save_config(lay, cfg)
    cohort = _cohort(lay)
    embedder = _embedder(cfg)
    cache = EmbeddingCache(lay.embeddings)
    lay.matrices.mkdir(parents=True, exist_ok=True)
    done = {}
    with Partial(lay, "embed"):
        for strategy in (Strategy.CTE, Strategy.GKC):
            source = _source(lay, strategy)
            fm = assemble_matrix(cohort, strategy, MODALITIES, source=source,
                                 embedder=embedder, cache=cache)
            write_matrix(fm, lay.matrices / f"{strategy.value}.tsv")
            done[strategy.value] = list(fm.shape)
        cache.flush()
    return {"embedder": embedder.name, "provider_calls": embedder.calls, "matrices": done}


def _plan(cfg: RunConfig, y):
    return make_cv_plan(y, cfg.n_folds, cfg.n_repeats, cfg.cv_seed)


def cmd_eval(args, lay: Layout):
    cfg = _load_config(lay)
    if args.model:
        cfg.model = args.model
    if args.strategies:
        cfg.strategies = [Strategy.parse(s).value for s in args.strategies.split(",")]
    if args.repeats:
        cfg.n_repeats = args.repeats
    kb = _kb(cfg)
    cohort = _cohort(lay)
    y = labels(cohort)
    plan = _plan(cfg, y)
    # fail early, before any training, if a text strategy lacks its inputs
    factories = {s: _factory(lay, cfg, s, MODALITIES, cohort, kb) for s in cfg.strategies}
    lay.results.mkdir(parents=True, exist_ok=True)
    all_records, summary = [], {}
    with Partial(lay, "eval"):
        for s in cfg.strategies:
            recs = run_cv(plan, y, factories[s], cfg.model, cfg.grid_for(), strategy=s,
                          subset=subset_name(MODALITIES))
            all_records += recs
            summary[s] = _summary_block(recs, cfg)
        write_records(all_records, lay.results / "records.csv")
        strategies = list(cfg.strategies)
        pairs = {}
        by = {s: [r for r in all_records if r.strategy == s] for s in strategies}
        for i, a in enumerate(strategies):
            for b in strategies[i + 1:]:
                pairs[f"{a}_vs_{b}"] = _compare_or_none(by[a], by[b])
        write_summary({"model": cfg.model, "grid": cfg.grid_for(), "grid_version": cfg.grid_version,
                       "n_repeats": cfg.n_repeats, "n_folds": cfg.n_folds,
                       "strategies": summary, "wilcoxon": pairs},
                      lay.results / "summary.json")
    _save_config(lay, cfg)
    return {s: round(v["auc_roc"]["mean"], 4) for s, v in summary.items()}


def cmd_ablate(args, lay: Layout):
    cfg = _load_config(lay)
    strategy = Strategy.parse(args.strategy or "GKC")
    kb = _kb(cfg)
    cohort = _cohort(lay)
    y = labels(cohort)
    plan = _plan(cfg, y)
    full = _factory(lay, cfg, strategy, MODALITIES, cohort, kb)

    def factory_for(subset):
        if strategy is Strategy.ENF:
            return EnfFactory(cohort, kb.classes.class_ids, subset)
        spans = {s.modality: s for s in full.group_spans}
        cols = np.concatenate([np.arange(spans[m].start, spans[m].stop) for m in subset])
        out, start = [], 0
        for m in subset:
            out.append(GroupSpan(m, start, start + spans[m].width))
            start += spans[m].width
        return PrecomputedFactory(full.X[:, cols], out)

    lay.results.mkdir(parents=True, exist_ok=True)
    with Partial(lay, "ablate"):
        rows = run_ablation(plan, y, factory_for, cfg.model, cfg.grid_for(),
                            strategy=strategy.value, bootstrap_seed=cfg.bootstrap_seed)
        write_records([r for row in rows for r in row.records],
                      lay.results / f"ablation_{strategy.value}_records.csv")
        table = [{"subset": row.name,
                  **{m: dataclasses.asdict(v) for m, v in row.summary.items()}} for row in rows]
        write_summary({"strategy": strategy.value, "model": cfg.model, "rows": table},
                      lay.results / f"ablation_{strategy.value}.json")
    return {row.name: round(row.summary["auc_roc"].mean, 4) for row in rows}


def cmd_attribute(args, lay: Layout):
    cfg = _load_config(lay)
    strategy = Strategy.parse(args.strategy or "GKC")
    kb = _kb(cfg)
    cohort = _cohort(lay)
    y = labels(cohort)
    plan = _plan(cfg, y)
    fac = _factory(lay, cfg, strategy, MODALITIES, cohort, kb)
    model = args.model or cfg.model
    res = attribute_cv(plan, y, fac, fac.group_spans, model, None, repeat=0,
                       n_permutations=cfg.n_permutations)
    lay.results.mkdir(parents=True, exist_ok=True)
    out = {"strategy": strategy.value, "model": model, **res.as_dict()}
    write_summary(out, lay.results / f"attribution_{strategy.value}.json")
    return out["shares"]


def cmd_compare(args, lay: Layout):
    cfg = _load_config(lay)
    path = lay.results / "records.csv"
    _require(path, "eval", "evaluation records")
    recs = read_records(path)
    names = [Strategy.parse(s).value for s in args.configs]
    by = {n: [r for r in recs if r.strategy == n] for n in names}
    for n, rs in by.items():
        if not rs:
            raise MissingStageError(f"no records for {n}; run 'eval --strategies {n}' first",
                                    stage="eval")
    ref = names[0]
    rows, series = [], {}
    for n in names:
        summ = summarize_records(by[n], seed=cfg.bootstrap_seed)
        for metric, s in summ.items():
            cmp = None if n == ref else _compare_or_none(by[n], by[ref], metric)
            rows.append({"name": n, "metric": metric, "mean": s.mean, "sd": s.sd,
                         "ci_lo": s.ci_lo, "ci_hi": s.ci_hi,
                         "p_value": None if cmp is None else cmp.get("p_value")})
        series[n] = {"auc_roc": [r.auc_roc for r in sorted(by[n], key=lambda r: r.key)],
                     "auc_prc": [r.auc_prc for r in sorted(by[n], key=lambda r: r.key)]}
    tag = "_vs_".join(names)
    lay.results.mkdir(parents=True, exist_ok=True)
    table = comparison_table(rows)
    (lay.results / f"compare_{tag}.txt").write_text(table, encoding="utf-8")
    write_summary({"reference": ref, "rows": rows, "series": series},
                  lay.results / f"compare_{tag}.json")
    sys.stdout.write(table)
    return None


COMMANDS = {"synth": cmd_synth, "profiles": cmd_profiles, "curate": cmd_curate,
            "embed": cmd_embed, "eval": cmd_eval, "ablate": cmd_ablate,
            "attribute": cmd_attribute, "compare": cmd_compare}


def _base_config(args, lay: Layout, fresh: bool = False) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    elif lay.config.exists() and not fresh:
        cfg = _load_config(lay)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.cv_seed = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="gkc-run", help="output directory")
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--seed", type=int, help="synthetic cohort and CV seed")

    ap = argparse.ArgumentParser(prog="gkc", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate or import a cohort")
    p.add_argument("--cohort", help="import patient records (JSONL) instead of generating")
    p.add_argument("--n-patients", dest="n_patients", type=int)
    p.add_argument("--strength", dest="planted_signal_strength", type=float)
    p.add_argument("--noise-tokens", dest="noise_profile_tokens", type=int)
    p.add_argument("--prevalence", dest="prevalence_target", type=float)

    sub.add_parser("profiles", parents=[common], help="build modality profiles")

    p = sub.add_parser("curate", parents=[common], help="summarize profiles with a curator")
    p.add_argument("--provider", choices=["mock", "external"])
    p.add_argument("--strict-schema", action="store_true")
    p.add_argument("--max-in-flight", type=int, default=4)

    p = sub.add_parser("embed", parents=[common], help="embed profiles and reports")
    p.add_argument("--embedder", choices=["mock", "external"])
    p.add_argument("--dim", type=int)

    p = sub.add_parser("eval", parents=[common], help="repeated cross-validation")
    p.add_argument("--strategies", help="comma list from ENF,CTE,GKC")
    p.add_argument("--model", choices=[k.value for k in ModelKind])
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("ablate", parents=[common], help="all 7 modality subsets")
    p.add_argument("--strategy", default="GKC")

    p = sub.add_parser("attribute", parents=[common], help="modality attribution")
    p.add_argument("--strategy", default="GKC")
    p.add_argument("--model", choices=[k.value for k in ModelKind])

    p = sub.add_parser("compare", parents=[common], help="strategy comparison table")
    p.add_argument("configs", nargs="+", help="strategies; the first is the reference")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    lay = Layout(args.out)
    lay.root.mkdir(parents=True, exist_ok=True)
    try:
        with DirLock(lay.root):
            if args.config and args.command != "synth":
                cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text("utf-8")))
                _save_config(lay, cfg)
            if args.seed is not None and args.command != "synth":
                cfg = _load_config(lay)
                cfg.cv_seed = args.seed
                _save_config(lay, cfg)
            out = COMMANDS[args.command](args, lay)
    except CliError as exc:
        err = {"error": type(exc).__name__, "message": str(exc), **exc.details}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return exc.exit_code
    except MissingArtifactError as exc:
        err = {"error": "MissingArtifactError", "message": str(exc), "stage": exc.stage}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable error
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1
    if out is not None:
        sys.stdout.write(json.dumps(out, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
