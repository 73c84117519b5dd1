"""Command-line pipeline driver.

Every subcommand writes its artifacts plus ``manifest.json`` into ``--out``.
Artifacts are staged in a scratch directory and only moved into place when
the subcommand succeeds.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import shutil
import sys
import tempfile
import traceback
from dataclasses import fields, replace

from . import __version__
from .creditmodel import fit_logistic, select_top_k, wald_screen, write_model_report, write_ranking_csv
from .errors import DataError, HinRiskError, InvariantViolation, NumericalError
from .evalharness import timestamp_sweep, write_roc_csv, write_sweep_csv
from .hin import default_sme_schema, load_hin, write_hin
from .metapath import write_metapaths
from .mpfeatures import KINDS, build_feature_matrix, feature_specs
from .pipeline import PipelineConfig, candidate_paths, enterprise_labels, evaluate, infer_risk, parse_window
from .riskbayes import posterior, save_model
from .synthgen import GenConfig, generate_records, write_records

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4, 5
DATA_FILES = ("nodes", "edges", "attributes", "labels")


class UsageError(Exception):
    pass


# -- configuration ------------------------------------------------------------


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise UsageError("config file must hold a JSON object")
    return d


def resolve_config(args) -> tuple[PipelineConfig, dict, dict]:
    """Merge defaults, the config file and flags (flags win).

    Returns the pipeline config, generator overrides and the remaining
    top-level settings (such as ``data``).
    """
    file_cfg = _read_config(args.config)
    gen = dict(file_cfg.pop("synth", {}))
    extra = {k: file_cfg.pop(k) for k in ("data", "windows") if k in file_cfg}
    pipe_keys = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(file_cfg) - pipe_keys)
    if unknown:
        raise UsageError(f"unknown config keys {unknown}")
    try:
        cfg = PipelineConfig.from_dict(file_cfg)
        flags = {
            "seed": args.seed,
            "workers": args.workers,
            "max_relations": args.max_relations,
            "top_k": args.top_k,
            "folds": args.folds,
            "as_of": parse_window(args.as_of) if args.as_of else None,
            "feature_kinds": tuple(k.strip() for k in args.feature_kinds.split(",") if k.strip())
            if args.feature_kinds
            else None,
            "paths_file": getattr(args, "paths", None),
        }
        cfg = replace(cfg, **{k: v for k, v in flags.items() if v is not None})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        gen["seed"] = args.seed
    else:
        gen.setdefault("seed", cfg.seed)
    if getattr(args, "data", None):
        extra["data"] = args.data
    return cfg, gen, extra


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _data_paths(extra):
    data = extra.get("data")
    if not data:
        raise UsageError("--data DIR is required")
    paths = {k: os.path.join(data, f"{k}.csv") for k in DATA_FILES}
    missing = [p for k, p in paths.items() if k in ("nodes", "edges") and not os.path.exists(p)]
    if missing:
        raise DataError(f"missing input files {missing}")
    return {k: p for k, p in paths.items() if os.path.exists(p)}


def _load(extra):
    paths = _data_paths(extra)
    hin = load_hin(
        default_sme_schema(), paths["nodes"], paths["edges"], paths.get("labels"), paths.get("attributes")
    )
    return hin, paths


# -- subcommands ----------------------------------------------------------------
# each takes (cfg, gen, extra, args, out) and returns the input files it read


def cmd_synth(cfg, gen, extra, args, out):
    base = GenConfig()
    known = {f.name for f in fields(GenConfig)}
    unknown = sorted(set(gen) - known)
    if unknown:
        raise UsageError(f"unknown synth keys {unknown}")
    if "degrees" in gen:
        gen["degrees"] = {**base.degrees, **gen["degrees"]}
    gcfg = replace(base, **gen)
    records, truth = generate_records(gcfg)
    write_records(records, truth, out)
    with open(os.path.join(out, "synth_config.json"), "w", encoding="utf-8") as fh:
        json.dump(gcfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {}


def cmd_ingest(cfg, gen, extra, args, out):
    hin, paths = _load(extra)
    if cfg.as_of is not None:
        from .hin import as_of

        hin = as_of(hin, *cfg.as_of)
    write_hin(hin, out)
    _write_summary(hin, os.path.join(out, "summary.json"))
    return paths


def cmd_validate(cfg, gen, extra, args, out):
    hin, paths = _load(extra)
    _write_summary(hin, os.path.join(out, "validation.json"))
    print(f"valid: {len(hin.nodes)} nodes, {len(hin.edges)} edges")
    return paths


def _write_summary(hin, path):
    types = {t.name: len(hin.nodes_of_type(t)) for t in hin.schema.object_types}
    rels = {}
    for e in hin.edges.values():
        k = f"{e.rtype.source.name}-{e.rtype.name}->{e.rtype.target.name}"
        rels[k] = rels.get(k, 0) + 1
    labels = {}
    for n in hin.nodes.values():
        if n.risk_label is not None:
            c = labels.setdefault(n.otype.name, {"0": 0, "1": 0})
            c[str(int(n.risk_label))] += 1
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"nodes": types, "edges": dict(sorted(rels.items())), "labels": labels, "fingerprint": hin.fingerprint()},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def cmd_enumerate(cfg, gen, extra, args, out):
    schema = default_sme_schema()
    paths = candidate_paths(schema, replace(cfg, max_paths=args.limit, paths_file=None))
    write_metapaths(paths, os.path.join(out, "metapaths.txt"))
    for p in paths:
        print(p)
    return {}


def _risk_stage(cfg, extra):
    hin, paths = _load(extra)
    if cfg.as_of is not None:
        from .hin import as_of

        hin = as_of(hin, *cfg.as_of)
    labeled, models, risk = infer_risk(hin, cfg.alpha, cfg.threshold)
    return hin, labeled, models, risk, paths


def cmd_infer_risk(cfg, gen, extra, args, out):
    hin, labeled, models, risk, paths = _risk_stage(cfg, extra)
    for name, m in sorted(models.items()):
        save_model(m, os.path.join(out, f"nb_{name}.json"))
    with open(os.path.join(out, "risk.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "type", "posterior", "gamma", "source"])
        for nid, n in labeled.nodes.items():
            model = models.get(n.otype.name)
            post = repr(posterior(model, n)) if model is not None and n.otype.name != "news" else ""
            if n.otype.name == "news":
                src = "news-polarity" if n.risk_label is not None else "unlabeled"
            else:
                src = n.label_source or "unlabeled"
            w.writerow([nid, n.otype.name, post, int(risk[nid]), src])
    return paths


def cmd_features(cfg, gen, extra, args, out):
    hin, labeled, models, risk, paths = _risk_stage(cfg, extra)
    mps = candidate_paths(hin.schema, cfg)
    write_metapaths(mps, os.path.join(out, "metapaths.txt"))
    for kind in cfg.feature_kinds:
        fm = build_feature_matrix(labeled, feature_specs(mps, kind), risk, workers=cfg.workers)
        fm.write(os.path.join(out, f"features_{kind}.csv"))
    return _with_paths_file(paths, cfg)


def _with_paths_file(paths, cfg):
    if cfg.paths_file:
        paths = dict(paths, metapaths=cfg.paths_file)
    return paths


def cmd_train(cfg, gen, extra, args, out):
    import numpy as np

    hin, labeled, models, risk, paths = _risk_stage(cfg, extra)
    labels = enterprise_labels(hin, cfg.root_type)
    mps = candidate_paths(hin.schema, cfg)
    kind = args.kind or cfg.feature_kinds[-1]
    if kind not in cfg.feature_kinds:
        raise UsageError(f"--kind {kind} is not among the enabled feature kinds")
    fm = build_feature_matrix(labeled, feature_specs(mps, kind), risk, workers=cfg.workers)
    rows = [i for i, nid in enumerate(fm.row_ids) if nid in labels]
    fm = fm.take_rows(rows)
    y = np.array([int(labels[i]) for i in fm.row_ids])
    ranking = wald_screen(fm, y, joint=cfg.joint_wald)
    write_ranking_csv(ranking, os.path.join(out, f"ranking_{kind}.csv"))
    top = fm.select(select_top_k(ranking, cfg.top_k))
    model = fit_logistic(top.imputed(), y, top.names)
    write_model_report(model, os.path.join(out, f"model_{kind}.json"))
    return _with_paths_file(paths, cfg)


def _slug(name):
    return name.lower().replace(" ", "_")


def cmd_evaluate(cfg, gen, extra, args, out):
    hin, paths = _load(extra)
    result = evaluate(hin, cfg)
    result.report.write_json(os.path.join(out, "report.json"))
    for m, roc in sorted(result.report.roc.items()):
        write_roc_csv(roc, os.path.join(out, f"roc_{_slug(m)}.csv"))
    for m, auc in sorted(result.report.auc.items()):
        print(f"{m:12s} AUC {auc:.4f}")
    for m, why in sorted(result.report.failures.items()):
        print(f"{m:12s} failed: {why}")
    return _with_paths_file(paths, cfg)


def _windows(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            out.append(parse_window(part))
    if not out:
        raise ValueError("no windows given")
    return out


def cmd_sweep(cfg, gen, extra, args, out):
    hin, paths = _load(extra)
    spec = args.windows or extra.get("windows")
    if not spec:
        raise UsageError("--windows START:END[,START:END...] is required")
    try:
        windows = _windows(spec) if isinstance(spec, str) else [tuple(map(int, w)) for w in spec]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    points = timestamp_sweep(hin, windows, cfg)
    write_sweep_csv(points, os.path.join(out, "sweep.csv"))
    for p in points:
        tail = f"  ({p.error})" if p.error else ""
        print(f"[{p.window_start}, {p.window_end}] metric {p.metric:.4f}{tail}")
    return _with_paths_file(paths, cfg)


def cmd_report(cfg, gen, extra, args, out):
    src = args.input
    report_path = os.path.join(src, "report.json")
    if not os.path.exists(report_path):
        raise UsageError(f"{report_path} not found; run evaluate first")
    with open(report_path, encoding="utf-8") as fh:
        rep = json.load(fh)
    lines = [f"# Method comparison ({rep['metric']})", "", "| method | average | folds |", "|---|---|---|"]
    for m, d in rep["methods"].items():
        avg = "failed" if d["average"] is None else f"{d['average']:.4f}"
        folds = ", ".join(f"{v:.3f}" for v in d["folds"])
        lines.append(f"| {m} | {avg} | {folds} |")
    inputs = {"report": report_path}
    sweep_path = os.path.join(src, "sweep.csv")
    if os.path.exists(sweep_path):
        inputs["sweep"] = sweep_path
        lines += ["", "# Timestamp sweep", "", "| window | metric |", "|---|---|"]
        with open(sweep_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                lines.append(f"| {row['window_start']}:{row['window_end']} | {row['metric'] or 'n/a'} |")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return inputs


COMMANDS = {
    "ingest": (cmd_ingest, "hin", "load and validate CSVs, write normalized copies"),
    "validate": (cmd_validate, "hin", "check input CSVs against the schema"),
    "enumerate": (cmd_enumerate, "metapath", "list candidate meta paths"),
    "infer-risk": (cmd_infer_risk, "riskbayes", "fit Naive Bayes risk models and impute labels"),
    "features": (cmd_features, "mpfeatures", "compute meta-path feature matrices"),
    "train": (cmd_train, "creditmodel", "Wald-rank features and fit the top-k logistic model"),
    "evaluate": (cmd_evaluate, "evalharness", "cross-validated method comparison"),
    "sweep": (cmd_sweep, "evalharness", "pipeline metric per as-of window"),
    "synth": (cmd_synth, "synthgen", "generate a synthetic network"),
    "report": (cmd_report, "cli", "summarize evaluate/sweep outputs"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--max-relations", type=int)
    common.add_argument("--top-k", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("--as-of", metavar="START:END")
    common.add_argument("--feature-kinds", metavar=",".join(KINDS))
    parser = argparse.ArgumentParser(prog="hinrisk", description="SME credit-risk features from typed networks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name not in ("enumerate", "synth", "report"):
            p.add_argument("--data", help="directory with nodes/edges/attributes/labels CSVs")
        if name in ("features", "train", "evaluate", "sweep"):
            p.add_argument("--paths", help="meta-path file to use instead of enumeration")
        if name == "enumerate":
            p.add_argument("--limit", type=int, default=None, help="keep only the first N paths")
        if name == "train":
            p.add_argument("--kind", choices=KINDS)
        if name == "sweep":
            p.add_argument("--windows", help="START:END[,START:END...]")
        if name == "report":
            p.add_argument("--input", required=True, help="directory holding report.json")
    return parser


def _origin_module(exc) -> str | None:
    mod = None
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("hinrisk.") and name not in ("hinrisk.errors", "hinrisk.cli"):
            mod = name.split(".", 1)[1]
    return mod


def _finalize(out, stage, command, cfg, gen, inputs):
    """Move staged artifacts into ``out`` and write the manifest."""
    os.makedirs(out, exist_ok=True)
    artifacts = {}
    for name in sorted(os.listdir(stage)):
        os.replace(os.path.join(stage, name), os.path.join(out, name))
        artifacts[name] = _sha256(os.path.join(out, name))
    config = {"pipeline": cfg.to_dict()}
    if command == "synth":
        config["synth"] = gen
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "version": __version__,
        "seed": gen.get("seed", cfg.seed) if command == "synth" else cfg.seed,
        "config": config,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "inputs": {k: {"path": os.path.basename(p), "sha256": _sha256(p)} for k, p in sorted(inputs.items())},
        "artifacts": artifacts,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    func, module, _ = COMMANDS[args.command]
    stage = None
    try:
        cfg, gen, extra = resolve_config(args)
        parent = os.path.dirname(os.path.abspath(args.out)) or "."
        os.makedirs(parent, exist_ok=True)
        stage = tempfile.mkdtemp(prefix=".hinrisk-stage-", dir=parent)
        inputs = func(cfg, gen, extra, args, stage) or {}
        _finalize(args.out, stage, args.command, cfg, gen, inputs)
        return EXIT_OK
    except UsageError as exc:
        print(f"hinrisk {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HinRiskError as exc:
        code = (
            EXIT_DATA
            if isinstance(exc, DataError)
            else EXIT_NUMERIC
            if isinstance(exc, NumericalError)
            else EXIT_INTERNAL
            if isinstance(exc, InvariantViolation)
            else EXIT_INTERNAL
        )
        _error(args.command, _origin_module(exc) or module, exc)
        return code
    except ValueError as exc:
        _error(args.command, _origin_module(exc) or module, exc)
        return EXIT_USAGE
    except Exception as exc:  # anything else is a bug in the package
        _error(args.command, _origin_module(exc) or module, exc)
        return EXIT_INTERNAL
    finally:
        if stage is not None and os.path.isdir(stage):
            shutil.rmtree(stage, ignore_errors=True)


def _error(command, module, exc):
    print(
        json.dumps({"command": command, "module": module, "error": type(exc).__name__, "message": str(exc)}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
