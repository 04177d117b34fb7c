"""Command-line entry point for reproducible experiment runs.

Commands: validate, classify, eval, sweep, synth, project. Every run is
driven by a YAML config file plus flags (precedence: flag > config >
built-in default); the fully resolved config is written into the output
directory so any run can be replayed bit-identically. Results go to
files under the output directory only; logs go to stderr. Reports are
written as JSON, as an aligned plain-text table, and as a PNG figure.

The output directory resolves as --out, then the config "out" key, then
the PROTOCLASS_OUT environment variable, then ./protoclass-out.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import evaluate as ev
from . import figures, prototypes, store, templates
from .classify import classify_batch
from .errors import ProtoclassError
from .evaluate import PipelineConfig
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger("protoclass")

RULE_ALIASES = {"softmax": "softmaxProto", "npc": "npc", "knn": "knn"}

DEFAULT_CONFIG: dict = {
    "out": None,
    "seed": 0,
    "parallel": None,
    "rule": "npc",
    "tau": 0.01,
    "k": 11,
    "metric": "euclidean",
    "templates": "baseline",
    "proto_samples": None,
    "pca_dim": None,
    "inputs": {
        "gallery": None,
        "queries": None,
        "train": None,
        "test": None,
        "text": None,
        "banks": {},
        "a_train": None,
        "a_test": None,
        "b_train": None,
        "b_test": None,
    },
    "sweep": {
        "kind": "k",
        "ks": [1, 3, 5, 7, 11],
        "sizes": [50, 25, 20, 15, 10],
        "seeds": [1, 2, 3, 4, 5],
        "pca_dims": ["none", 1024, 512],
    },
    "synth": {"classes": 8, "dim": 32, "per_class": 50, "spread": 0.1},
}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        elif value is not None:
            merged[key] = value
    return merged


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    obj = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ProtoclassError(f"config file {path} must hold a mapping")
    return obj


def _none_token(value):
    # YAML/flags use "none"/"full" where the engine uses null
    if isinstance(value, str) and value.lower() in ("none", "null", "full"):
        return None
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    """flag > config file > default, with every knob materialized."""
    cfg = _deep_merge(DEFAULT_CONFIG, _load_config_file(getattr(args, "config", None)))
    flag_map = {
        "out": "out",
        "seed": "seed",
        "parallel": "parallel",
        "rule": "rule",
        "tau": "tau",
        "k": "k",
        "metric": "metric",
        "templates": "templates",
        "proto_samples": "proto_samples",
        "pca_dim": "pca_dim",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    for attr in ("gallery", "queries", "train", "test", "text", "a_train", "a_test", "b_train", "b_test"):
        value = getattr(args, attr, None)
        if value is not None:
            cfg["inputs"][attr] = value
    for attr, key in (("kind", "kind"), ("ks", "ks"), ("sizes", "sizes"),
                      ("sweep_seeds", "seeds"), ("pca_dims", "pca_dims")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg["sweep"][key] = value
    for attr, key in (("classes", "classes"), ("dim", "dim"),
                      ("per_class", "per_class"), ("spread", "spread")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg["synth"][key] = value
    banks = getattr(args, "bank", None)
    if banks:
        parsed = {}
        for item in banks:
            label, _, path = item.partition("=")
            if not path:
                raise ProtoclassError(f"--bank expects label=path, got {item!r}")
            parsed[label] = path
        cfg["inputs"]["banks"] = parsed
    cfg["proto_samples"] = _none_token(cfg["proto_samples"])
    cfg["pca_dim"] = _none_token(cfg["pca_dim"])
    if cfg["out"] is None:
        cfg["out"] = os.environ.get("PROTOCLASS_OUT") or "protoclass-out"
    if cfg["parallel"] is None:
        cfg["parallel"] = os.cpu_count() or 1
    if cfg["rule"] not in RULE_ALIASES:
        raise ProtoclassError(f"rule must be one of {sorted(RULE_ALIASES)}, got {cfg['rule']!r}")
    return cfg


def _pipeline_config(cfg: dict) -> PipelineConfig:
    return PipelineConfig(
        rule=RULE_ALIASES[cfg["rule"]],
        temperature=float(cfg["tau"]),
        metric=cfg["metric"],
        k=int(cfg["k"]),
        proto_sample_size=None if cfg["proto_samples"] is None else int(cfg["proto_samples"]),
        proto_seed=int(cfg["seed"]),
        pca_dim=None if cfg["pca_dim"] is None else int(cfg["pca_dim"]),
        workers=int(cfg["parallel"]),
    )


def _prepare_out(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    resolved = yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)
    (out / "config.resolved.yaml").write_text(resolved, encoding="utf-8")
    return out


def _require_input(cfg: dict, key: str) -> str:
    value = cfg["inputs"].get(key)
    if not value:
        raise ProtoclassError(f"missing required input {key!r} (flag --{key.replace('_', '-')} or config inputs.{key})")
    return value


def _write_report(report, out: Path) -> None:
    report.validate()
    (out / "report.json").write_bytes(report.to_json_bytes())
    (out / "report.txt").write_text(report.render_text(), encoding="utf-8")
    figures.render_report_figure(report, out / "report.png")
    log.info("wrote %s", out / "report.json")


def _template_bank(selector: str) -> templates.TemplateBank:
    if selector in ("baseline", "multiple", "selected"):
        return templates.bank_by_name(selector)
    return templates.load_bank(selector)


def cmd_validate(args: argparse.Namespace) -> int:
    # validation writes nothing, so the config file is not consulted;
    # --templates is honored only when given explicitly
    embedding_sets = []
    failed = False
    catalog = None
    for path in args.paths:
        try:
            if str(path).endswith(".jsonl"):
                captions = store.read_captions(path)
                if catalog is not None:
                    captions.check_catalog(catalog)
                print(f"OK {path} (captions={len(captions.entries)})")
            else:
                s = store.read_set(path)
                catalog = catalog or s.catalog
                embedding_sets.append((path, s))
                print(f"OK {path} (records={len(s)} dim={s.dim} classes={len(s.catalog)} split={s.split_tag})")
        except (ProtoclassError, OSError) as exc:
            print(f"FAIL {path}: {exc}", file=sys.stderr)
            failed = True
    if args.templates is not None and embedding_sets:
        bank = _template_bank(args.templates)
        for path, s in embedding_sets:
            counts = s.class_counts()
            bad = {cid: n for cid, n in counts.items() if n != len(bank)}
            if len(counts) != len(s.catalog) or bad:
                print(
                    f"FAIL {path}: per-class record counts {counts} do not match "
                    f"template bank {bank.name!r} of size {len(bank)}",
                    file=sys.stderr,
                )
                failed = True
            else:
                print(f"OK {path} per-class counts match bank {bank.name!r} ({len(bank)})")
    if args.join:
        if len(embedding_sets) < 2:
            print("FAIL --join needs at least two embedding sets", file=sys.stderr)
            failed = True
        first_path, first = embedding_sets[0] if embedding_sets else (None, None)
        for path, other in embedding_sets[1:]:
            try:
                ev.join_by_source_id(first, other)
                print(f"OK join {first_path} ~ {path}")
            except ProtoclassError as exc:
                print(f"FAIL join {first_path} ~ {path}: {exc}", file=sys.stderr)
                failed = True
    return 1 if failed else 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    pipeline = _pipeline_config(cfg)
    queries = store.read_set(_require_input(cfg, "queries"))
    rule = pipeline.rule
    if cfg["inputs"].get("text") and rule == "softmaxProto":
        text_set = store.read_set(cfg["inputs"]["text"])
        prototypes.check_same_catalog(text_set.catalog, queries.catalog)
        model: object = prototypes.build_text_prototypes(text_set)
    else:
        gallery = store.read_set(_require_input(cfg, "gallery"))
        ev._check_compatible(gallery, queries)
        if rule == "knn":
            model = gallery
        else:
            model = prototypes.build_visual_prototypes(
                gallery, pipeline.proto_sample_size, pipeline.proto_seed
            )
    preds = classify_batch(queries, rule, pipeline.classifier(), model, workers=pipeline.workers)
    lines = []
    for pred, sid, true_cid in zip(preds, queries.source_ids, queries.class_ids):
        lines.append(
            json.dumps(
                {
                    "sourceId": sid,
                    "predictedClassId": pred.class_id,
                    "trueClassId": int(true_cid),
                    "rule": pred.rule,
                    "scores": list(pred.scores),
                },
                ensure_ascii=False,
            )
        )
    (out / "predictions.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    acc = ev.accuracy_of(preds, queries)
    log.info("classified %d queries, top-1 %.2f%%", len(queries), acc)
    print(f"top1={acc:.2f} n={len(queries)} out={out / 'predictions.jsonl'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    pipeline = _pipeline_config(cfg)
    train = store.read_set(_require_input(cfg, "train"))
    test = store.read_set(_require_input(cfg, "test"))
    report = ev.crossval_2fold(train, test, pipeline, label=cfg["rule"])
    _write_report(report, out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    pipeline = _pipeline_config(cfg)
    kind = cfg["sweep"]["kind"]
    if kind in ("k", "samples"):
        train = store.read_set(_require_input(cfg, "train"))
        test = store.read_set(_require_input(cfg, "test"))
        if kind == "k":
            report = ev.sweep_k(train, test, ks=[int(k) for k in cfg["sweep"]["ks"]], cfg=pipeline)
        else:
            sizes = [_none_token(s) for s in cfg["sweep"]["sizes"]]
            sizes = [None if s is None else int(s) for s in sizes]
            report = ev.sweep_prototype_samples(
                train, test, sizes=sizes, seeds=[int(s) for s in cfg["sweep"]["seeds"]], cfg=pipeline
            )
    elif kind == "fusion":
        a_train = store.read_set(_require_input(cfg, "a_train"))
        a_test = store.read_set(_require_input(cfg, "a_test"))
        b_train = store.read_set(_require_input(cfg, "b_train"))
        b_test = store.read_set(_require_input(cfg, "b_test"))
        dims = [_none_token(d) for d in cfg["sweep"]["pca_dims"]]
        dims = [None if d is None else int(d) for d in dims]
        report = ev.sweep_fusion(a_train, a_test, b_train, b_test, pca_dims=dims, cfg=pipeline)
    elif kind == "prompts":
        banks = cfg["inputs"].get("banks") or {}
        if not banks:
            raise ProtoclassError("prompts sweep needs --bank label=path (or config inputs.banks)")
        train = store.read_set(_require_input(cfg, "train"))
        test = store.read_set(_require_input(cfg, "test"))
        text_sets = {label: store.read_set(path) for label, path in banks.items()}
        report = ev.sweep_prompts(text_sets, train, test, cfg=pipeline)
    else:
        raise ProtoclassError(f"sweep kind must be k/samples/fusion/prompts, got {kind!r}")
    _write_report(report, out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    spec = SyntheticSpec(
        n_classes=int(cfg["synth"]["classes"]),
        dim=int(cfg["synth"]["dim"]),
        per_class=int(cfg["synth"]["per_class"]),
        spread=float(cfg["synth"]["spread"]),
        seed=int(cfg["seed"]),
    )
    train, test = generate_synthetic(spec)
    for split, s in (("train", train), ("test", test)):
        path = out / f"{split}.emb1"
        store.write_set(s, path)
        store.read_set(path)  # self-check: output must validate
        log.info("wrote %s (%d records)", path, len(s))
        print(f"wrote {path}")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _prepare_out(cfg)
    s = store.read_set(args.input)
    projection = ev.project_2d(s)
    (out / "projection.csv").write_text(projection.to_csv(), encoding="utf-8")
    figures.render_projection_figure(projection, s.catalog.names, out / "projection.png")
    log.info("wrote %s", out / "projection.csv")
    print(f"wrote {out / 'projection.csv'}")
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--out", help="output directory (also: config out, $PROTOCLASS_OUT)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--rule", choices=sorted(RULE_ALIASES))
    parser.add_argument("--k", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--metric", choices=["cosine", "euclidean"])
    parser.add_argument("--proto-samples", dest="proto_samples",
                        help="per-class prototype sample size, or 'full'")
    parser.add_argument("--pca-dim", dest="pca_dim", help="PCA output dim, or 'none'")
    parser.add_argument("--parallel", type=int, help="worker threads (does not affect outputs)")
    parser.add_argument("--templates", help="template bank: baseline/multiple/selected or a JSON file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoclass",
        description="zero/few-shot classification over precomputed embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check EMB1/manifest/caption files and joinability")
    p.add_argument("paths", nargs="+")
    p.add_argument("--join", action="store_true",
                   help="require the given embedding sets to describe the same records")
    _add_common_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("classify", help="classify one query set against a gallery")
    _add_common_flags(p)
    p.add_argument("--gallery")
    p.add_argument("--queries")
    p.add_argument("--text", help="text embedding set for softmax text prototypes")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="two-fold cross-validation for one pipeline")
    _add_common_flags(p)
    p.add_argument("--train")
    p.add_argument("--test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="k / samples / fusion / prompts sweeps")
    _add_common_flags(p)
    p.add_argument("--kind", choices=["k", "samples", "fusion", "prompts"])
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--a-train", dest="a_train")
    p.add_argument("--a-test", dest="a_test")
    p.add_argument("--b-train", dest="b_train")
    p.add_argument("--b-test", dest="b_test")
    p.add_argument("--ks", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--sizes", type=lambda s: s.split(","))
    p.add_argument("--sweep-seeds", dest="sweep_seeds",
                   type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--pca-dims", dest="pca_dims", type=lambda s: s.split(","))
    p.add_argument("--bank", action="append", help="prompts sweep: label=path, repeatable")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic train/test pair")
    _add_common_flags(p)
    p.add_argument("--classes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--spread", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("project", help="2-D PCA projection of a set to CSV and PNG")
    _add_common_flags(p)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProtoclassError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
