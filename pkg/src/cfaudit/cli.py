"""``cfaudit`` command line: data generation, fitting, training, counterfactuals, audits.

Every subcommand writes its outputs atomically and, on invalid input, exits
with status 2 and one JSON line on stderr: ``{"error": <type>, "message": ...}``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import MitigationConfig, audit_baseline, audit_intervention, explain, mitigate
from .cfengine import (TARGET_DISTRIBUTIONS, InterventionSpec, cf_batch, cf_measurement_sweep, read_pairs,
                       sample_targets, write_pairs)
from .classifier import (Classifier, ClassifierConfig, LabelClassifier, split_indices, train_classifier,
                         train_label_classifier)
from .codec import Codec, CodecConfig, OracleCodec, train_codec
from .dataset import GRAPHS, read_dataset, write_dataset, generate
from .errors import CfAuditError, ConfigError, FormatError
from .fileio import atomic_directory, atomic_write_text
from .nn import NeuralNet
from .renderer import to_pgm
from .reports import importance_svg, scatter_csv, scatter_svg, to_json
from .rng import Rng
from .scm import StructuralModel, fit_scm, scale


class UsageError(CfAuditError):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors become :class:`UsageError` so they share the JSON error line."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(cls, path):
    if path is None:
        return cls()
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    extra = sorted(set(doc) - set(fields))
    if extra:
        raise ConfigError(f"unknown config keys for {cls.__name__}: {extra}")
    cfg = cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in doc.items()})
    return cfg


def _csv(records: list[dict]) -> str:
    if not records:
        return ""
    keys = list(records[0])
    lines = [",".join(keys)]
    for r in records:
        lines.append(",".join(repr(float(r[k])) if isinstance(r[k], (float, np.floating)) else str(r[k])
                              for k in keys))
    return "\n".join(lines) + "\n"


def _split_rows(args, n: int) -> np.ndarray:
    """Rows selected by ``--split`` (the seeded train/held-out split train-clf uses) and ``--rows``."""
    if args.split == "all":
        rows = np.arange(n)
    else:
        train, test = split_indices(n, args.holdout, Rng(args.split_seed).spawn(1))
        rows = train if args.split == "train" else test
    limit = getattr(args, "rows", None)
    return rows if limit is None else rows[:limit]


def _add_split(s, rows_help: str | None = None) -> None:
    s.add_argument("--split", choices=["all", "train", "test"], default="all",
                   help="row subset; matches train-clf's split for the same --split-seed and --holdout")
    s.add_argument("--split-seed", type=int, default=ClassifierConfig.seed)
    s.add_argument("--holdout", type=float, default=ClassifierConfig.holdout)
    if rows_help:
        s.add_argument("--rows", type=int, help=rows_help)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# classifier files


def save_classifier(path, clf, result, kind: str, height: int, width: int) -> None:
    header = {
        "version": "clf-1",
        "kind": kind,
        "height": height,
        "width": width,
        "heldout_accuracy": result.heldout_accuracy,
        "test_rows": [int(k) for k in result.test_idx],
        "net": "net.json",
    }
    with atomic_directory(path) as tmp:
        (tmp / "classifier.json").write_text(to_json(header))
        (tmp / "net.json").write_text(clf.net.to_json())
        (tmp / "train_log.csv").write_text(_csv(result.log))


def load_classifier(path):
    path = Path(path)
    try:
        header = json.loads((path / "classifier.json").read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{path} is not a classifier directory") from exc
    if header.get("version") != "clf-1":
        raise FormatError("unsupported classifier version")
    net = NeuralNet.from_json((path / header["net"]).read_text())
    clf = Classifier(net) if header["kind"] == "binary" else LabelClassifier(net)
    return clf, header


def _load_codec(spec: str, data):
    if spec == "oracle":
        return OracleCodec(data)
    return Codec.load(spec, data.graph)


def _load_scm(path) -> StructuralModel:
    return StructuralModel.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args):
    model = GRAPHS[args.graph]()
    ds = generate(model, args.n, args.seed)
    write_dataset(ds, args.out)
    prevalence = float(ds.labels["y"].mean())
    print(f"wrote {ds.n} rows to {args.out} (graph={args.graph}, seed={args.seed}, y prevalence={prevalence:.4f})")


def cmd_fit_scm(args):
    ds = read_dataset(args.data)
    model = fit_scm(ds.graph, ds.table, laplace_alpha=args.alpha)
    atomic_write_text(args.out, model.to_json() + "\n")
    for line in model.summary():
        print(line)


def cmd_train_codec(args):
    ds = read_dataset(args.data)
    cfg = _config(CodecConfig, args.config)
    if args.split != "all":
        ds = ds.subset(_split_rows(args, ds.n))
    codec = train_codec(ds, cfg, progress=None if args.quiet else
                        lambda r: print(f"{r['phase']} epoch {r['epoch']}: loss={r['loss']:.5f} "
                                        f"loss_x={r['loss_x']:.6f} loss_z={r['loss_z']:.5f}", flush=True))
    codec.save(args.out)
    atomic_write_text(Path(args.out) / "train_log.csv", _csv(codec.log))
    print(f"saved codec to {args.out}")


def cmd_train_clf(args):
    ds = read_dataset(args.data)
    cfg = _config(ClassifierConfig, args.config)
    h, w = ds.images.shape[1:]
    if args.target == "l":
        res = train_label_classifier(ds.images, ds.table["l"], cfg)
        kind = "label"
    else:
        if args.target not in ds.labels:
            raise ConfigError(f"dataset has no label column {args.target!r}")
        res = train_classifier(ds.images, ds.labels[args.target], cfg)
        kind = "binary"
    save_classifier(args.out, res.model, res, kind, h, w)
    print(f"held-out accuracy {res.heldout_accuracy:.4f}; saved to {args.out}")


def cmd_cf(args):
    ds = read_dataset(args.data)
    model = _load_scm(args.scm)
    codec = _load_codec(args.codec, ds)
    specs = [InterventionSpec.parse(s) for s in args.do]
    rows = _split_rows(args, ds.n)
    pairs = cf_batch(codec, model, ds, specs, filter_redundant=args.filter_redundant, rows=rows)
    write_pairs(pairs, ds.graph, args.out)
    skipped = sum(p.skipped for p in pairs)
    print(f"wrote {len(pairs)} pairs ({skipped} skipped) to {args.out}")


def cmd_sweep(args):
    ds = read_dataset(args.data)
    model = _load_scm(args.scm)
    codec = _load_codec(args.codec, ds)
    spec = model.graph.spec(args.attribute)
    if args.targets:
        targets = [float(v) for v in args.targets.split(",")]
        for t in targets:
            scale(spec, t)
    else:
        targets = sample_targets(ds, args.attribute, args.n_targets, Rng(args.seed), args.target_dist).tolist()
    rows = _split_rows(args, ds.n)
    res = cf_measurement_sweep(codec, model, ds, args.attribute, targets, rows=rows)
    with atomic_directory(args.out) as tmp:
        (tmp / "sweep.csv").write_text(_csv(res.points))
        (tmp / "sweep.json").write_text(to_json(res.to_dict()))
    print(json.dumps(res.to_dict()))


def _write_bias(out, report):
    with atomic_directory(out) as tmp:
        (tmp / "bias.json").write_text(to_json(report.to_dict()))
        (tmp / "scatter.csv").write_text(scatter_csv(report.scatter))
        (tmp / "scatter.svg").write_text(scatter_svg([(r[0], r[1]) for r in report.scatter], report.intervention))


def cmd_audit(args):
    clf, _ = load_classifier(args.clf)
    if args.baseline:
        if args.data is None:
            raise ConfigError("--baseline needs --data")
        ds = read_dataset(args.data)
        name, _, factor = args.baseline.partition("=")
        report = audit_baseline(clf, ds.images[_split_rows(args, ds.n)], name, float(factor) if factor else 1.25)
    else:
        if args.pairs is None:
            raise ConfigError("audit needs --pairs or --baseline")
        pairs, _ = read_pairs(args.pairs)
        report = audit_intervention(clf, pairs)
    _write_bias(args.out, report)
    print(f"{report.intervention}: n={report.n_pairs} p_flip={report.p_flip:.4f} bias={report.bias:+.4f} "
          f"significant={report.significant}")


def cmd_explain(args):
    ds = read_dataset(args.data)
    clf, _ = load_classifier(args.clf)
    model = _load_scm(args.scm)
    codec = _load_codec(args.codec, ds)
    rows = _split_rows(args, ds.n)
    rep = explain(clf, codec, model, ds, args.attributes.split(","), mode=args.mode, rows=rows)
    with atomic_directory(args.out) as tmp:
        (tmp / "importance.json").write_text(to_json(rep.to_dict()))
        (tmp / "importance.svg").write_text(importance_svg(rep.ranking, rep.global_scores, "CF importance"))
    for a in rep.ranking:
        print(f"{a}: {rep.global_scores[a]:+.4f}")


def cmd_mitigate(args):
    ds = read_dataset(args.data)
    clf, header = load_classifier(args.clf)
    if header["kind"] != "binary":
        raise ConfigError("mitigation needs a binary classifier")
    pairs, _ = read_pairs(args.pairs)
    cfg = _config(MitigationConfig, args.config)
    cfg = dataclasses.replace(cfg, lam=args.lam if args.lam is not None else cfg.lam)
    if args.max_accuracy_drop is not None:
        cfg = dataclasses.replace(cfg, max_accuracy_drop=args.max_accuracy_drop)
    test = np.array(header["test_rows"], dtype=np.int64)
    train = np.setdiff1d(np.arange(ds.n), test)
    y = ds.labels["y"]
    res = mitigate(clf, ds.images[train], y[train], pairs, ds.images[test], y[test], cfg)
    val_rows = set(res.validation_rows.tolist())
    val = [p for p in pairs if not p.skipped and p.row_id in val_rows]
    before = audit_intervention(clf, val)
    after = audit_intervention(res.classifier, val)
    acc_before = float(np.mean(clf.predict(ds.images[test]) == y[test]))
    acc_after = float(np.mean(res.classifier.predict(ds.images[test]) == y[test]))
    doc = {
        "version": "mitigation-1",
        "lambda": cfg.lam,
        "selected_epoch": res.selected_epoch,
        "accuracy_floor": res.floor,
        "validation_split": "80/20 by row id",
        "heldout_accuracy_before": acc_before,
        "heldout_accuracy_after": acc_after,
        "before": {k: v for k, v in before.to_dict().items() if k != "scatter"},
        "after": {k: v for k, v in after.to_dict().items() if k != "scatter"},
        "checkpoints": res.checkpoints,
    }
    with atomic_directory(args.out) as tmp:
        (tmp / "mitigation.json").write_text(to_json(doc))
        (tmp / "classifier.json").write_text(to_json({**header, "heldout_accuracy": acc_after}))
        (tmp / "net.json").write_text(res.classifier.net.to_json())
    print(f"bias {before.bias:+.4f} -> {after.bias:+.4f}; accuracy {acc_before:.4f} -> {acc_after:.4f} "
          f"(epoch {res.selected_epoch})")


def cmd_export_pgm(args):
    ds = read_dataset(args.data)
    rows = _int_list(args.rows)
    with atomic_directory(args.out) as tmp:
        for k in rows:
            if not 0 <= k < ds.n:
                raise ConfigError(f"row {k} outside 0..{ds.n - 1}")
            (tmp / f"row{k:06d}.pgm").write_bytes(to_pgm(ds.images[k]))
    print(f"wrote {len(rows)} PGM files to {args.out}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cfaudit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"cfaudit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-data", help="simulate attributes, render glyphs, assign labels")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--graph", choices=sorted(GRAPHS), default="glyph")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("fit-scm", help="fit structural equations to the attribute table")
    s.add_argument("--data", required=True)
    s.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing for CPTs")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit_scm)

    s = sub.add_parser("train-codec", help="train the encoder/generator pair")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--quiet", action="store_true")
    _add_split(s)
    s.set_defaults(func=cmd_train_codec)

    s = sub.add_parser("train-clf", help="train the audited classifier (or the glyph-label classifier)")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--target", default="y", help="label column, or 'l' for the glyph-label classifier")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train_clf)

    s = sub.add_parser("cf", help="generate counterfactual pairs")
    s.add_argument("--data", required=True)
    s.add_argument("--codec", required=True, help="codec directory, or 'oracle'")
    s.add_argument("--scm", required=True)
    s.add_argument("--do", action="append", required=True, help='e.g. "i=1.0" or "t=3,s=0"; repeatable')
    s.add_argument("--filter-redundant", action="store_true")
    _add_split(s, "use only the first N selected rows")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cf)

    s = sub.add_parser("sweep", help="target-vs-measured counterfactual sweep")
    s.add_argument("--data", required=True)
    s.add_argument("--codec", required=True)
    s.add_argument("--scm", required=True)
    s.add_argument("--attribute", required=True)
    s.add_argument("--targets", help="comma-separated raw targets (default: --n-targets draws per --target-dist)")
    s.add_argument("--n-targets", type=int, default=100)
    s.add_argument("--target-dist", choices=TARGET_DISTRIBUTIONS, default="marginal",
                   help="how default targets are drawn: observed values or uniform over the raw range")
    s.add_argument("--seed", type=int, default=0)
    _add_split(s)
    s.add_argument("--rows", type=int, default=30, help="use the first N selected rows")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("audit", help="bias report for counterfactual pairs or a baseline transform")
    s.add_argument("--clf", required=True)
    s.add_argument("--pairs")
    s.add_argument("--baseline", help="flip | brightness=F")
    s.add_argument("--data")
    _add_split(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("explain", help="counterfactual importance of binary attributes")
    s.add_argument("--data", required=True)
    s.add_argument("--clf", required=True)
    s.add_argument("--codec", required=True)
    s.add_argument("--scm", required=True)
    s.add_argument("--attributes", required=True)
    s.add_argument("--mode", choices=["hard", "prob"], default="hard")
    _add_split(s, "use only the first N selected rows")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("mitigate", help="fine-tune with the counterfactual logit regularizer")
    s.add_argument("--data", required=True)
    s.add_argument("--clf", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--max-accuracy-drop", type=float)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mitigate)

    s = sub.add_parser("export-pgm", help="dump dataset rows as 8-bit PGM")
    s.add_argument("--data", required=True)
    s.add_argument("--rows", required=True, help="comma-separated row indices")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_pgm)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (CfAuditError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        msg = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": type(exc).__name__, "message": msg}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
