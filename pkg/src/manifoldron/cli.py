"""Command line: ``manifoldron generate|fit|predict|eval|grid|bench``.

Exit status: 0 success, 1 usage error, 2 data or model error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from pathlib import Path
from typing import Optional

import numpy as np

from .classifier import DISTANCE_MODES, FitConfig, ManifoldronEnsemble, fit, predict_many
from .datagen import MANIFOLD_NAMES, ManifoldDatasetSpec, gen_manifold, gen_regression, gen_toy2d, split
from .errors import DataError, InputError, ManifoldronError
from .evaluation import benchmark, decision_grid, evaluate_model
from .io import Dataset, load_csv, load_features, save_csv, sniff_header
from .manifold import DEFAULT_K
from .modelio import load_model, save_model
from .regressor import fit_regressor, predict_many as regress_many

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
TOYS = ("spirals", "circles", "moons")
FUNCTIONS = ("f1", "f2", "f3", "f4", "f5", "f6")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _slug(name: str) -> str:
    return name.replace("-", "").replace("_", "").lower()


def manifold_name(kind: str) -> Optional[str]:
    """Canonical manifold name for ``six-circles``, ``SixCircles``, ``dna`` and similar."""
    for name in MANIFOLD_NAMES:
        if _slug(name) == _slug(kind):
            return name
    return None


def _bag_range(text: str) -> tuple[int, int]:
    parts = text.split("..")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN..MAX (e.g. 4..7), got {text!r}") from None
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 1 <= MIN <= MAX, got {text!r}")
    return lo, hi


def _header_flag(args) -> Optional[bool]:
    return {"auto": None, "yes": True, "no": False}[args.header]


def _add_header(p: argparse.ArgumentParser) -> None:
    p.add_argument("--header", choices=("auto", "yes", "no"), default="auto",
                   help="whether CSV input starts with a header row (default: detect)")


def _add_fit_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--neighbors", type=int, default=d(DEFAULT_K), help="k for simplex trimming (default 14)")
    p.add_argument("--bag-features", type=_bag_range, default=None, metavar="MIN..MAX",
                   help="features per base model (default 4..7, clipped to the feature count)")
    p.add_argument("--bag-count", type=int, default=None, help="number of base models")
    p.add_argument("--distance-mode", choices=DISTANCE_MODES, default=d("auto"))
    p.add_argument("--trim-rule", choices=("mutual", "either"), default=d("mutual"),
                   help="keep an edge if endpoints are mutual kNN, or kNN in either direction")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--processes", type=int, default=d(6), help="worker processes (default 6)")


def _config(args, base: Optional[dict] = None) -> FitConfig:
    cfg = dict(base or {})
    for key, attr in (("k", "neighbors"), ("nf_range", "bag_features"), ("n_estimators", "bag_count"),
                      ("distance_mode", "distance_mode"), ("seed", "seed"), ("processes", "processes")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "trim_rule", None) is not None:
        cfg["mutual"] = args.trim_rule == "mutual"
    return FitConfig(**cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="manifoldron", description="Manifold-based classification and regression.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("kind", help=f"{', '.join(TOYS)}, {', '.join(FUNCTIONS)} or a manifold "
                                f"({', '.join(MANIFOLD_NAMES)}; kebab-case accepted)")
    g.add_argument("-o", "--out", required=True, help="output directory")
    g.add_argument("--n", type=int, default=None, help="sample count (toys 400, functions 200)")
    g.add_argument("--noise", type=float, default=None, help="toy noise level")
    g.add_argument("--m", type=int, default=12, help="points per tube cross-section")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", type=float, default=None,
                   help="also write a seeded train/test split with this train fraction")

    f = sub.add_parser("fit", help="fit a model from a CSV file")
    f.add_argument("data")
    f.add_argument("-o", "--out", required=True, help="model file to write")
    f.add_argument("--regress", action="store_true", help="fit a regressor on a numeric target column")
    f.add_argument("--label-column", default="last", help="'last' or a header name")
    _add_header(f)
    _add_fit_flags(f)

    p = sub.add_parser("predict", help="predict labels for a CSV file")
    p.add_argument("model")
    p.add_argument("data", help="features, optionally followed by a label column")
    p.add_argument("-o", "--out", default=None, help="output CSV (default stdout)")
    _add_header(p)

    e = sub.add_parser("eval", help="evaluate a model on labelled CSV data")
    e.add_argument("model")
    e.add_argument("data")
    e.add_argument("--json", default=None, help="also write the report as JSON here")
    _add_header(e)

    gr = sub.add_parser("grid", help="export a decision grid as CSV")
    gr.add_argument("model")
    gr.add_argument("--bounds", type=float, nargs=4, required=True, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    gr.add_argument("--resolution", type=int, nargs="+", default=[100], metavar="N",
                    help="cells per axis, or NX NY")
    gr.add_argument("--dims", type=int, nargs=2, default=[0, 1], metavar=("X", "Y"))
    gr.add_argument("--fixed", default=None,
                    help="comma-separated full feature vector for models with more than 2 features")
    gr.add_argument("-o", "--out", required=True)

    b = sub.add_parser("bench", help="repeated split/fit/evaluate runs")
    b.add_argument("spec", help="JSON run spec, a CSV dataset, or a generator name")
    b.add_argument("--runs", type=int, default=None, help="number of runs (default 5)")
    b.add_argument("--split", type=float, default=None, help="train fraction (default 0.7)")
    b.add_argument("--regress", action="store_true", help="treat a CSV target as real-valued")
    b.add_argument("--json", default=None, help="also write the report as JSON here")
    _add_header(b)
    _add_fit_flags(b, defaults=False)
    return parser


def _cmd_generate(args) -> int:
    out = Path(args.out)
    kind = args.kind
    written = []
    name = manifold_name(kind)
    if name is not None:
        train, test = gen_manifold(ManifoldDatasetSpec(name, m=args.m, seed=args.seed))
        stem = kind.lower()
        for part, ds in (("train", train), ("test", test)):
            path = out / f"{stem}_{part}.csv"
            save_csv(ds, path)
            written.append((path, len(ds)))
    else:
        if kind in TOYS:
            ds = gen_toy2d(kind, args.n or 400, args.noise, args.seed)
        elif kind in FUNCTIONS:
            ds = gen_regression(kind, args.n or 200, args.seed)
        else:
            raise UsageError(f"unknown dataset {kind!r}; choose from {', '.join(TOYS + FUNCTIONS + MANIFOLD_NAMES)}")
        path = out / f"{kind}.csv"
        save_csv(ds, path)
        written.append((path, len(ds)))
        if args.split is not None:
            train, test = split(ds, args.split, args.seed)
            for part, d in (("train", train), ("test", test)):
                path = out / f"{kind}_{part}.csv"
                save_csv(d, path)
                written.append((path, len(d)))
    for path, n in written:
        print(f"wrote {path} ({n} rows)")
    return EXIT_OK


def _cmd_fit(args) -> int:
    header = _header_flag(args)
    if header is None:
        header = sniff_header(args.data)
    ds = load_csv(args.data, args.label_column, header, regression=args.regress)
    config = _config(args)
    if args.regress:
        model = fit_regressor(ds.features, ds.labels, config.k, config.seed, config.mutual)
        summary = f"regressor: {len(model.complex.simplices)} simplices over {len(model.points)} points"
    else:
        model = fit(ds, config)
        summary = f"classifier: {len(model.bases)} base model(s), masks {model.masks}"
    save_model(model, args.out)
    print(f"{summary}; saved to {args.out}")
    return EXIT_OK


def _label_ids(model: ManifoldronEnsemble, raw: list[str]) -> np.ndarray:
    names = model.label_names or [str(c) for c in model.labels]
    index = {n: i for i, n in enumerate(names)}
    unknown = sorted(set(raw) - set(index))
    if unknown:
        print(f"warning: labels not seen in training count as errors: {unknown[:5]}", file=sys.stderr)
    return np.array([index.get(r, -1) for r in raw], dtype=np.int64)


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    dim = model.n_features if isinstance(model, ManifoldronEnsemble) else model.points.shape[1]
    x, _ = load_features(args.data, dim, _header_flag(args))
    if isinstance(model, ManifoldronEnsemble):
        pred = predict_many(model, x)
        names = model.label_names
        cells = [names[c] if names else str(c) for c in pred]
        column = "label"
    else:
        cells = [repr(float(v)) for v in regress_many(model, x)]
        column = "prediction"
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([column])
        w.writerows([c] for c in cells)
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    regress = not isinstance(model, ManifoldronEnsemble)
    dim = model.points.shape[1] if regress else model.n_features
    x, raw = load_features(args.data, dim, _header_flag(args))
    if raw is None:
        raise DataError(f"{args.data}: eval needs a label column after the {dim} feature columns")
    if regress:
        try:
            truth = np.array([float(v) for v in raw])
        except ValueError:
            raise DataError(f"{args.data}: regression targets must be numeric") from None
    else:
        truth = _label_ids(model, raw)
    report = evaluate_model(model, x, truth, name=str(args.data))
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_grid(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, ManifoldronEnsemble):
        raise InputError("grid export needs a classifier model")
    res = args.resolution
    if len(res) not in (1, 2):
        raise UsageError("--resolution takes N or NX NY")
    fixed = None
    if args.fixed is not None:
        try:
            fixed = [float(v) for v in args.fixed.split(",")]
        except ValueError:
            raise UsageError(f"--fixed must be comma-separated numbers, got {args.fixed!r}") from None
    x0, x1, y0, y1 = args.bounds
    grid = decision_grid(model, ((x0, x1), (y0, y1)), res[0] if len(res) == 1 else tuple(res),
                         fixed, tuple(args.dims))
    grid.to_csv(args.out, model.label_names)
    print(f"wrote {args.out} ({grid.labels.shape[1]}x{grid.labels.shape[0]} cells)")
    return EXIT_OK


def _bench_dataset(spec: dict, args, base: Path) -> tuple[Dataset, str]:
    if "csv" in spec:
        path = Path(spec["csv"])
        path = path if path.is_absolute() else base / path
        header = spec.get("header", _header_flag(args))
        if header is None:
            header = sniff_header(path)
        regress = spec.get("regress", args.regress)
        return load_csv(path, spec.get("label_column", "last"), header, regression=regress), str(spec["csv"])
    kind = spec.get("generate")
    if kind in TOYS:
        n = spec.get("n", 400)
        return gen_toy2d(kind, n, spec.get("noise"), spec.get("seed", 0)), f"{kind}(n={n})"
    if kind in FUNCTIONS:
        n = spec.get("n", 200)
        return gen_regression(kind, n, spec.get("seed", 0)), f"{kind}(n={n})"
    raise UsageError(
        f"bench dataset must be {{'csv': path}} or {{'generate': one of {', '.join(TOYS + FUNCTIONS)}}}"
    )


def _cmd_bench(args) -> int:
    source = Path(args.spec)
    if source.suffix == ".json":
        try:
            spec = json.loads(source.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{source}: invalid JSON: {exc}") from None
        base = source.parent
    elif source.suffix == ".csv":
        spec, base = {"dataset": {"csv": str(source)}}, Path.cwd()
    else:
        spec, base = {"dataset": {"generate": args.spec}}, Path.cwd()
    if not isinstance(spec, dict) or "dataset" not in spec:
        raise DataError(f"{source}: a run spec needs a 'dataset' entry")
    ds, name = _bench_dataset(spec["dataset"], args, base)
    file_cfg = dict(spec.get("config", {}))
    if "nf_range" in file_cfg and file_cfg["nf_range"] is not None:
        file_cfg["nf_range"] = tuple(file_cfg["nf_range"])
    try:
        config = _config(args, file_cfg)
    except TypeError as exc:
        raise DataError(f"{source}: bad config entry: {exc}") from None
    runs = args.runs if args.runs is not None else spec.get("runs", 5)
    fraction = args.split if args.split is not None else spec.get("split", 0.7)
    report = benchmark(ds, config, runs, fraction, config.seed, name)
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "fit": _cmd_fit, "predict": _cmd_predict,
            "eval": _cmd_eval, "grid": _cmd_grid, "bench": _cmd_bench}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"manifoldron {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ManifoldronError, OSError) as exc:
        print(f"manifoldron {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        print(f"manifoldron {args.command}: internal error; please report with the traceback above",
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
