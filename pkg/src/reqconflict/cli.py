"""Command-line pipeline: validate, synth, phase1, train-ner, phase2, report.

Configuration is line-oriented ``key = value`` text with ``#`` comments;
command-line flags override file values. Exit codes: 0 ok, 1 validation
failure, 2 configuration error, 3 runtime failure. Output files are written
atomically (temp file then rename) and a fixed config + seed reproduces the
output tree byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

from . import corpus as corpus_mod
from . import crf as crf_mod
from . import ner as ner_mod
from .corpus import CorpusError, parse_requirements
from .embedding import (
    EmbeddingError,
    check_covers,
    fit_tfidf,
    fuse,
    load_external_embeddings,
    tfidf_table,
)
from .evaluation import (
    aggregate_folds,
    confusion,
    format_delta,
    macro_metrics,
    normalized_confusion_csv,
)
from .semantic import conflict_report_csv, phase2_filter
from .similarity import pairwise_matrix
from .threshold import CandidateConflictSet, phase1_detect, roc_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

OUT_ROOT_ENV = "REQCONFLICT_OUT_ROOT"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    dataset: str = ""
    embedding: str = "tfidf"  # tfidf | external | fused
    external_path: str = ""
    target_dim: int = 256
    n_folds: int = 3
    seed: int = 0
    ner: str = "general"  # comma-separated backends: general | crf:<model path>
    m_count: int = 5
    t_o: float = 1.0
    objective: str = "youden"  # youden | literal
    scope: str = "global"  # global | fold
    out_dir: str = ""

    def validate(self) -> None:
        if not self.dataset:
            raise CliError("config: dataset path is required", EXIT_CONFIG)
        if self.embedding not in ("tfidf", "external", "fused"):
            raise CliError(f"config: unknown embedding scheme {self.embedding!r}", EXIT_CONFIG)
        if self.embedding in ("external", "fused") and not self.external_path:
            raise CliError(
                f"config: embedding scheme {self.embedding!r} requires external_path",
                EXIT_CONFIG,
            )
        if self.n_folds < 2:
            raise CliError("config: n_folds must be >= 2", EXIT_CONFIG)
        if self.m_count < 1:
            raise CliError("config: m_count must be >= 1", EXIT_CONFIG)
        if not 0.0 <= self.t_o <= 1.0:
            raise CliError("config: t_o must be in [0, 1]", EXIT_CONFIG)
        if self.objective not in ("youden", "literal"):
            raise CliError(f"config: unknown objective {self.objective!r}", EXIT_CONFIG)
        if self.scope not in ("global", "fold"):
            raise CliError(f"config: unknown similarity scope {self.scope!r}", EXIT_CONFIG)
        for backend in self.backends():
            if backend != "general" and not backend.startswith("crf:"):
                raise CliError(f"config: unknown ner backend {backend!r}", EXIT_CONFIG)

    def backends(self) -> list[str]:
        return [b.strip() for b in self.ner.split(",") if b.strip()]

    def snapshot(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text("utf-8")
    except OSError as e:
        raise CliError(f"config: cannot read {path}: {e}", EXIT_CONFIG) from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config: line {lineno}: expected key = value", EXIT_CONFIG)
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_INT_KEYS = {"target_dim", "n_folds", "seed", "m_count"}
_FLOAT_KEYS = {"t_o"}


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    known = {f.name for f in fields(RunConfig)}
    for key, value in file_values.items():
        if key not in known:
            raise CliError(f"config: unknown key {key!r}", EXIT_CONFIG)
        try:
            if key in _INT_KEYS:
                setattr(cfg, key, int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        except ValueError:
            raise CliError(f"config: bad value for {key}: {value!r}", EXIT_CONFIG) from None
    for key in known:
        override = getattr(args, key, None)
        if override is not None:
            setattr(cfg, key, override)
    if not cfg.out_dir:
        root = os.environ.get(OUT_ROOT_ENV, ".")
        cfg.out_dir = str(Path(root) / "reqconflict-run")
    cfg.validate()
    return cfg


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(path: str) -> corpus_mod.RequirementSet:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise CliError(f"dataset: cannot read {path}: {e}", EXIT_CONFIG) from None
    try:
        return parse_requirements(raw, name=Path(path).stem)
    except CorpusError as e:
        raise CliError("dataset: " + "; ".join(e.diagnostics), EXIT_VALIDATION) from None


def build_table(cfg: RunConfig, reqset):
    try:
        if cfg.embedding == "tfidf":
            return tfidf_table(fit_tfidf(reqset), reqset)
        external = load_external_embeddings(Path(cfg.external_path).read_bytes())
        check_covers(external, reqset)
        if cfg.embedding == "external":
            return external
        tf = tfidf_table(fit_tfidf(reqset), reqset)
        return fuse(tf, external, cfg.target_dim, cfg.seed)
    except OSError as e:
        raise CliError(f"embedding: cannot read {cfg.external_path}: {e}", EXIT_CONFIG) from None
    except EmbeddingError as e:
        raise CliError(f"embedding: {e}", EXIT_VALIDATION) from None


def candidates_csv(cands: CandidateConflictSet) -> str:
    lines = ["id,most_similar,similarity"]
    for rid in sorted(cands.members):
        partner, value = cands.evidence[rid]
        lines.append(f"{rid},{partner},{value:.6f}")
    return "\n".join(lines) + "\n"


def _fold_gold(reqset, ids):
    return {rid: reqset[rid].gold_conflict for rid in ids}


def run_phase1(cfg: RunConfig) -> dict:
    reqset = load_dataset(cfg.dataset)
    table = build_table(cfg, reqset)
    matrix = pairwise_matrix(table)
    folds = corpus_mod.make_folds(reqset, cfg.n_folds, cfg.seed)
    out = Path(cfg.out_dir)
    per_fold = []
    summaries = []
    for i in range(cfg.n_folds):
        try:
            selection, cands = phase1_detect(
                reqset, matrix, folds, i, objective=cfg.objective, scope=cfg.scope
            )
        except ValueError as e:
            raise CliError(f"phase1: fold {i}: {e}", EXIT_RUNTIME) from None
        test_ids = folds.fold_ids(i)
        gold = _fold_gold(reqset, test_ids)
        pred = {rid: rid in cands.members for rid in test_ids}
        cm = confusion(pred, gold)
        summary = macro_metrics(cm)
        summaries.append(summary)
        fold_dir = out / "folds" / str(i)
        write_atomic(fold_dir / "roc.csv", roc_csv(selection.points))
        write_atomic(fold_dir / "candidates.csv", candidates_csv(cands))
        write_atomic(fold_dir / "confusion.csv", normalized_confusion_csv(cm))
        per_fold.append(
            {
                "fold": i,
                "delta": selection.delta,
                "test_ids": sorted(test_ids),
                "candidates": sorted(cands.members),
                "macro_f1": summary.macro_f1,
                "macro_precision": summary.macro_precision,
                "macro_recall": summary.macro_recall,
                "conflict_support": summary.conflict.support,
                "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
            }
        )
    agg = aggregate_folds(summaries)
    artifact = {
        "dataset": reqset.name,
        "embedding": cfg.embedding,
        "embedding_dim": table.dim,
        "seed": cfg.seed,
        "n_folds": cfg.n_folds,
        "folds": per_fold,
        "aggregate": {"mean": agg.mean, "std": agg.std},
    }
    write_atomic(out / "phase1.json", json.dumps(artifact, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "config.snapshot", cfg.snapshot())
    write_atomic(out / "summary.txt", render_summary(cfg, artifact, None))
    return artifact


def _make_tagger(backend: str):
    if backend == "general":
        return ner_mod.general_tag_text, "general"
    model_path = backend[len("crf:") :]
    try:
        model = crf_mod.CrfModel.load(model_path)
    except (OSError, ValueError) as e:
        raise CliError(f"phase2: cannot load model {model_path}: {e}", EXIT_CONFIG) from None

    def tagger(text: str):
        from .tokens import tokenize

        toks = tokenize(text)
        if not toks:
            return []
        labels = crf_mod.viterbi_decode(model, toks)
        return ner_mod.spans_from_tags(toks, labels)

    return tagger, "crf"


def run_phase2(cfg: RunConfig) -> dict:
    out = Path(cfg.out_dir)
    phase1_path = out / "phase1.json"
    if not phase1_path.exists():
        raise CliError(f"phase2: missing Phase I artifacts at {phase1_path}", EXIT_CONFIG)
    try:
        phase1 = json.loads(phase1_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"phase2: corrupt Phase I artifact: {e}", EXIT_RUNTIME) from None
    reqset = load_dataset(cfg.dataset)
    table = build_table(cfg, reqset)
    matrix = pairwise_matrix(table)

    results = {}
    for backend in cfg.backends():
        tagger, label = _make_tagger(backend)
        per_fold = []
        summaries = []
        for fold in phase1["folds"]:
            i = fold["fold"]
            cands = CandidateConflictSet(
                members=set(fold["candidates"]),
                evidence={},
            )
            try:
                final = phase2_filter(
                    cands, reqset, matrix, tagger, m_count=cfg.m_count, t_o=cfg.t_o
                )
            except RuntimeError as e:
                raise CliError(f"phase2: {e}", EXIT_RUNTIME) from None
            test_ids = fold["test_ids"]
            gold = _fold_gold(reqset, test_ids)
            pred = {rid: rid in final.members for rid in test_ids}
            cm = confusion(pred, gold)
            summary = macro_metrics(cm)
            summaries.append(summary)
            fold_dir = out / "folds" / str(i)
            suffix = "" if backend == cfg.backends()[0] else f".{label}"
            write_atomic(fold_dir / f"final{suffix}.csv", conflict_report_csv(final))
            per_fold.append(
                {
                    "fold": i,
                    "final": sorted(final.members),
                    "macro_f1": summary.macro_f1,
                    "macro_precision": summary.macro_precision,
                    "macro_recall": summary.macro_recall,
                    "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
                }
            )
        agg = aggregate_folds(summaries)
        results[backend] = {
            "folds": per_fold,
            "aggregate": {"mean": agg.mean, "std": agg.std},
            "delta_vs_phase1": format_delta(
                phase1["aggregate"]["mean"]["macro_f1"], agg.mean["macro_f1"]
            ),
        }
    artifact = {
        "dataset": reqset.name,
        "m_count": cfg.m_count,
        "t_o": cfg.t_o,
        "backends": results,
    }
    write_atomic(out / "phase2.json", json.dumps(artifact, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "summary.txt", render_summary(cfg, phase1, artifact))
    return artifact


def render_summary(cfg: RunConfig, phase1: dict, phase2: dict | None) -> str:
    lines = [
        f"dataset: {phase1['dataset']}",
        f"embedding: {phase1['embedding']} (dim {phase1['embedding_dim']})",
        f"seed: {phase1['seed']}  folds: {phase1['n_folds']}",
        "",
        "phase 1 (similarity cutoff)",
    ]
    for fold in phase1["folds"]:
        lines.append(
            f"  fold {fold['fold']}: delta={fold['delta']:.2f} "
            f"macro F1={fold['macro_f1']:.4f} "
            f"P={fold['macro_precision']:.4f} R={fold['macro_recall']:.4f} "
            f"support={fold['conflict_support']}"
        )
    mean, std = phase1["aggregate"]["mean"], phase1["aggregate"]["std"]
    lines.append(
        f"  aggregate: macro F1 {mean['macro_f1']:.4f} ± {std['macro_f1']:.4f}, "
        f"P {mean['macro_precision']:.4f} ± {std['macro_precision']:.4f}, "
        f"R {mean['macro_recall']:.4f} ± {std['macro_recall']:.4f}"
    )
    if phase2 is not None:
        lines += ["", f"phase 2 (entity overlap, m={phase2['m_count']}, t_o={phase2['t_o']})"]
        for backend, res in phase2["backends"].items():
            m2, s2 = res["aggregate"]["mean"], res["aggregate"]["std"]
            lines.append(
                f"  {backend}: macro F1 {m2['macro_f1']:.4f} ± {s2['macro_f1']:.4f} "
                f"({res['delta_vs_phase1']})"
            )
    return "\n".join(lines) + "\n"


# --- subcommand entry points -------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        load_dataset(args.dataset)
    except CliError as e:
        print(str(e), file=sys.stderr)
        return e.code
    print(f"{args.dataset}: ok")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.base:
        base = load_dataset(args.base)
    else:
        base = corpus_mod.load_bundled_dataset()
    try:
        out = corpus_mod.generate_synthetic(base, args.n_conflicts, args.seed)
    except ValueError as e:
        raise CliError(f"synth: {e}", EXIT_CONFIG) from None
    text = corpus_mod.serialize_requirements(out)
    if args.output:
        write_atomic(Path(args.output), text)
        print(f"wrote {len(out)} requirements to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_phase1(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    artifact = run_phase1(cfg)
    mean = artifact["aggregate"]["mean"]
    print(
        f"phase1 done: macro F1 {mean['macro_f1']:.4f} over "
        f"{cfg.n_folds} folds -> {cfg.out_dir}"
    )
    return EXIT_OK


def cmd_phase2(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    artifact = run_phase2(cfg)
    for backend, res in artifact["backends"].items():
        print(
            f"phase2 [{backend}]: macro F1 {res['aggregate']['mean']['macro_f1']:.4f} "
            f"({res['delta_vs_phase1']})"
        )
    return EXIT_OK


def _parse_grid(spec: str | None) -> list[float] | None:
    if spec is None:
        return None
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"train-ner: bad grid {spec!r}", EXIT_CONFIG) from None


def cmd_train_ner(args: argparse.Namespace) -> int:
    try:
        text = Path(args.corpus).read_text("utf-8")
    except OSError as e:
        raise CliError(f"train-ner: cannot read {args.corpus}: {e}", EXIT_CONFIG) from None
    try:
        corpus = ner_mod.parse_annotated_corpus(text)
    except ner_mod.BioError as e:
        raise CliError(f"train-ner: {e}", EXIT_VALIDATION) from None

    grid_c1 = _parse_grid(args.grid_c1) or [args.c1]
    grid_c2 = _parse_grid(args.grid_c2) or [args.c2]
    best = None
    for c1 in grid_c1:
        for c2 in grid_c2:
            hp = {"c1": c1, "c2": c2, "max_iterations": args.max_iterations}
            report = crf_mod.evaluate_ner(
                corpus, n_folds=args.n_folds, seed=args.seed, hyperparams=hp
            )
            score = report["averages"]["macro"]["f1"]["mean"]
            print(f"c1={c1} c2={c2}: macro F1 {score:.4f}")
            if best is None or score > best[0]:
                best = (score, hp, report)
    _, hp, report = best
    model = crf_mod.train_crf(corpus, hyperparams=hp)
    model.save(args.output)
    print(f"trained on {len(corpus)} sentences with c1={hp['c1']} c2={hp['c2']}")
    for etype, m in report["per_type"].items():
        print(
            f"  {etype}: P {m['precision']['mean']:.2f}±{m['precision']['std']:.2f} "
            f"R {m['recall']['mean']:.2f}±{m['recall']['std']:.2f} "
            f"F1 {m['f1']['mean']:.2f}±{m['f1']['std']:.2f} "
            f"support {m['support']:.1f}"
        )
    for warning in report["warnings"]:
        print(f"  warning: {warning}")
    print(f"model written to {args.output}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise CliError(f"report: {args.run_dir} is not a directory", EXIT_CONFIG)
    found = sorted(run_dir.rglob("phase1.json"))
    if not found:
        raise CliError(f"report: no run artifacts under {args.run_dir}", EXIT_CONFIG)
    for p1 in found:
        try:
            phase1 = json.loads(p1.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"report: corrupt artifact {p1}: {e}", EXIT_RUNTIME) from None
        mean, std = phase1["aggregate"]["mean"], phase1["aggregate"]["std"]
        print(
            f"{phase1['dataset']} [{phase1['embedding']}] phase1: "
            f"macro F1 {mean['macro_f1']:.4f} ± {std['macro_f1']:.4f}"
        )
        p2_path = p1.parent / "phase2.json"
        if p2_path.exists():
            try:
                phase2 = json.loads(p2_path.read_text("utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise CliError(f"report: corrupt artifact {p2_path}: {e}", EXIT_RUNTIME) from None
            for backend, res in phase2["backends"].items():
                m2 = res["aggregate"]["mean"]
                print(
                    f"{phase2['dataset']} [{backend}] phase2: "
                    f"macro F1 {m2['macro_f1']:.4f} ({res['delta_vs_phase1']})"
                )
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--dataset")
    p.add_argument("--embedding", choices=["tfidf", "external", "fused"])
    p.add_argument("--external-path", dest="external_path")
    p.add_argument("--target-dim", dest="target_dim", type=int)
    p.add_argument("--n-folds", dest="n_folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ner", help="comma-separated: general and/or crf:<model path>")
    p.add_argument("--m-count", dest="m_count", type=int)
    p.add_argument("--t-o", dest="t_o", type=float)
    p.add_argument("--objective", choices=["youden", "literal"])
    p.add_argument("--scope", choices=["global", "fold"])
    p.add_argument("--out-dir", dest="out_dir")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reqconflict", description="Two-phase requirement conflict detection"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset file")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a dataset with planted conflicts")
    p.add_argument("--base", help="base CSV (default: bundled requirements)")
    p.add_argument("--n-conflicts", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("phase1", help="similarity-based candidate detection")
    _add_config_flags(p)
    p.set_defaults(func=cmd_phase1)

    p = sub.add_parser("phase2", help="entity-overlap filtering of phase1 candidates")
    _add_config_flags(p)
    p.set_defaults(func=cmd_phase2)

    p = sub.add_parser("train-ner", help="train the entity tagger")
    p.add_argument("corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--c1", type=float, default=0.1)
    p.add_argument("--c2", type=float, default=0.1)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=100)
    p.add_argument("--n-folds", dest="n_folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-c1", dest="grid_c1", help="comma-separated c1 values")
    p.add_argument("--grid-c2", dest="grid_c2", help="comma-separated c2 values")
    p.set_defaults(func=cmd_train_ner)

    p = sub.add_parser("report", help="consolidate run artifacts")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except Exception as e:  # unexpected: runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
