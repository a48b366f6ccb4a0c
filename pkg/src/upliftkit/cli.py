"""Command-line front end.

Every subcommand reads a CSV (``--data``), writes its artifacts below
``--out`` (``models/*.json``, ``tables/*.csv``, ``plots/*.svg`` and
``report.json``) and exits non-zero with a one-line diagnostic on error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import svg
from .data import SplitConfig, UpliftDataset, UpliftWarning, encode_all_dummies, encode_dummies, load_csv, split_uplift
from .estimators import (
    PREDICTION,
    dual_predict,
    dual_uplift_fit,
    inter_predict,
    inter_uplift_fit,
    load_model,
    predict_uplift,
    save_model,
)
from .lasso import best_features, refit_selected
from .qini import overall_uplift, qini_area, qini_bar_data, qini_curve_points, qini_table
from .quantize import apply_bins, bin_uplift, bin_uplift_categorical, square_cv, square_uplift


@dataclass
class RunConfig:
    command: str
    data: Path
    outcome: str
    treat: str
    out: Path
    seed: int = 0


class _Out:
    def __init__(self, root):
        self.root = Path(root)

    def path(self, kind: str, name: str) -> Path:
        p = self.root / kind / name if kind else self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def csv(self, name: str, frame: pd.DataFrame) -> Path:
        p = self.path("tables", name)
        frame.to_csv(p, index=False, lineterminator="\n")
        return p

    def json(self, kind: str, name: str, doc) -> Path:
        p = self.path(kind, name)
        p.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        return p

    def svg(self, name: str, text: str) -> Path:
        p = self.path("plots", name)
        p.write_text(text, encoding="utf-8")
        return p

    def report(self, doc) -> Path:
        return self.json("", "report.json", doc)


def _csv_list(text: str | None) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()] if text else []


def _load(args) -> UpliftDataset:
    ds = load_csv(args.data, outcome=args.outcome, treat=args.treat)
    if args.dummies == "auto":
        ds = encode_all_dummies(ds)
    elif args.dummies:
        ds = encode_all_dummies(ds, _csv_list(args.dummies))
    return ds


def _predictors(args, ds: UpliftDataset) -> list[str]:
    if getattr(args, "predictors", None):
        return _csv_list(args.predictors)
    skip = {PREDICTION}
    return [c for c in ds.features if ds.is_numeric(c) and c not in skip]


def _qini_artifacts(out: _Out, ds: UpliftDataset, prediction: str, nb_group: int, tag: str = "") -> dict:
    table = qini_table(ds, nb_group=nb_group, prediction=prediction)
    res = qini_area(table)
    suffix = f"_{tag}" if tag else ""
    out.csv(f"qini_table{suffix}.csv", table.to_frame())
    pts, bench = qini_curve_points(table)
    out.svg(
        f"qini_curve{suffix}.svg",
        svg.line_chart(
            [("Model", pts, "#1f77b4"), ("~Random", bench, "#444444")],
            title=f"Qini curve (q = {res.q:.4f})",
            xlabel="Proportion of population targeted (%)",
            ylabel="Relative incremental uplift (%)",
        ),
    )
    edges = np.concatenate(([0.0], table.phi * 100))
    labels = [f"{edges[k]:.0f}-{edges[k + 1]:.0f}" for k in range(table.nb_group)]
    out.svg(
        f"qini_bars{suffix}.svg",
        svg.bar_chart(labels, qini_bar_data(table), title="Uplift by group",
                      xlabel="Population targeted (%)", ylabel="Uplift (%)"),
    )
    return {"qini": res.q, "qini_raw": res.q_raw, "overall_uplift": overall_uplift(ds)}


def cmd_split(args, out: _Out) -> dict:
    ds = _load(args)
    strata = _csv_list(args.strata) or [ds.treat, ds.outcome]
    train, valid = split_uplift(ds, SplitConfig(p=args.p, strata=tuple(strata), seed=args.seed))
    out.csv("train.csv", train.frame)
    out.csv("valid.csv", valid.frame)
    return {"command": "split", "n": ds.n, "n_train": train.n, "n_valid": valid.n, "p": args.p, "seed": args.seed}


def cmd_fit(args, out: _Out) -> dict:
    ds = _load(args)
    if args.estimator == "dual":
        model = dual_uplift_fit(ds, _predictors(args, ds))
    elif args.terms:
        model = inter_uplift_fit(ds, input_mode="best", selected_terms=_csv_list(args.terms))
    else:
        model = inter_uplift_fit(ds, _predictors(args, ds), input_mode="all")
    path = out.path("models", args.model_name)
    save_model(model, path)
    return {"command": "fit", "estimator": args.estimator, "model": str(path)}


def cmd_predict(args, out: _Out) -> dict:
    ds = _load(args)
    model = load_model(args.model)
    scored = ds.with_columns(**{PREDICTION: predict_uplift(model, ds)})
    p = out.csv(args.output_name, scored.frame)
    return {"command": "predict", "rows": ds.n, "predictions": str(p)}


def cmd_eval(args, out: _Out) -> dict:
    ds = _load(args)
    summary = _qini_artifacts(out, ds, args.prediction, args.nb_group)
    print(f"Qini coefficient: {summary['qini']:.7g}")
    return {"command": "eval", **summary}


def cmd_select(args, out: _Out) -> dict:
    ds = _load(args)
    scan = best_features(
        ds,
        _predictors(args, ds),
        nb_lambda=args.nb_lambda,
        nb_group=args.nb_group,
        validation=args.validation,
        p=args.p,
        seed=args.seed,
    )
    out.csv("lambda_scan.csv", scan.to_frame())
    out.json("models", "selected_terms.json", scan.selected_terms)
    doc = {"command": "select", "selected_terms": scan.selected_terms}
    if args.report_value:
        print(f"lambda = {scan.best_lambda:.7g}, qini = {scan.best_q:.7g}")
        doc.update(best_lambda=scan.best_lambda, best_qini=scan.best_q)
    for term in scan.selected_terms:
        print(term)
    return doc


def cmd_bin(args, out: _Out) -> dict:
    ds = _load(args)
    if args.categorical:
        tree, ranking = bin_uplift_categorical(ds, args.x, alpha=args.alpha, n_min=args.n_min)
    else:
        tree, ranking = bin_uplift(ds, args.x, n_split=args.n_split, alpha=args.alpha, n_min=args.n_min), None
    print(tree.message())
    out.csv(f"bin_{args.x}.csv", tree.leaf_frame())
    out.csv(f"bin_{args.x}_trace.csv", pd.DataFrame([vars(r) for r in tree.trace]))
    if tree.found_split:
        labels = [f"[{lf.lower:.4g}, {lf.upper:.4g})" for lf in tree.leaves]
        out.svg(
            f"bin_{args.x}.svg",
            svg.bar_chart(labels, [lf.uplift for lf in tree.leaves], title=f"Binning results: {args.x}",
                          xlabel=args.x, ylabel="Uplift"),
        )
    doc = {"command": "bin", "variable": args.x, "found_split": tree.found_split, "cuts": tree.cuts}
    if ranking is not None:
        doc["ranking"] = [str(r) for r in ranking]
    return doc


def cmd_square(args, out: _Out) -> dict:
    ds = _load(args)
    grid, aug = square_uplift(ds, args.var1, args.var2, n_split=args.n_split, n_min=args.n_min, nb_group=args.nb_group)
    out.csv("augmented.csv", aug.frame)
    out.csv(f"square_{args.var1}_{args.var2}.csv", grid.frame())
    out.svg(
        f"square_{args.var1}_{args.var2}.svg",
        svg.heatmap(grid.uplift, grid.edges1, grid.edges2, title=f"Observed uplift: {args.var1} x {args.var2}",
                    xlabel=args.var1, ylabel=args.var2),
    )
    return {"command": "square", "rectangles": grid.b * grid.b, "valid_rectangles": int(grid.valid.sum())}


def cmd_squarecv(args, out: _Out) -> dict:
    ds = _load(args)
    scores = square_cv(
        ds, args.var1, args.var2,
        b_grid=[int(b) for b in _csv_list(args.b_grid)],
        c_grid=[int(c) for c in _csv_list(args.c_grid)],
        n_min=args.n_min, p=args.p, seed=args.seed, nb_group=args.nb_group,
    )
    out.csv("squarecv.csv", scores)
    best = scores.iloc[int(np.argmax(scores["qini"].to_numpy()))]
    print(f"best b = {int(best['b'])}, c = {int(best['c'])}, qini = {best['qini']:.7g}")
    return {"command": "squarecv", "best_b": int(best["b"]), "best_c": int(best["c"]), "best_qini": float(best["qini"])}


def _parse_bin_spec(text: str) -> tuple[str, int, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--bin expects var:n_split:alpha, got {text!r}")
    return parts[0], int(parts[1]), float(parts[2])


def _parse_square_spec(text: str) -> tuple[str, str, int, int]:
    parts = text.split(":")
    if len(parts) != 3 or len(parts[0].split(",")) != 2:
        raise ValueError(f"--square expects var1,var2:b:c, got {text!r}")
    v1, v2 = parts[0].split(",")
    return v1, v2, int(parts[1]), int(parts[2])


def _replace_with_dummies(ds, predictors, originals, new_col):
    ds = encode_dummies(ds, new_col)
    dummies = [c for c in ds.features if c.startswith(f"{new_col}_")]
    kept = [p for p in predictors if p not in originals]
    return ds, kept + dummies


def cmd_pipeline(args, out: _Out) -> dict:
    ds = _load(args)
    base_predictors = _predictors(args, ds)
    variants = [("Baseline", ds, base_predictors)]

    bin_specs = [_parse_bin_spec(s) for s in args.bin or []]
    quantized = {}
    for var, n_split, alpha in bin_specs:
        tree = bin_uplift(ds, var, n_split=n_split, alpha=alpha, n_min=args.n_min)
        print(tree.message())
        if tree.found_split:
            quantized[var] = apply_bins(tree, ds.numeric(var))
    full = ds.with_columns(**{f"{v}_quantized": codes for v, codes in quantized.items()})
    for var in quantized:
        d, preds = _replace_with_dummies(full, base_predictors, {var}, f"{var}_quantized")
        variants.append((f"Categorical {var} only", d, preds))
    if len(quantized) > 1:
        d, preds = full, base_predictors
        for var in quantized:
            d, preds = _replace_with_dummies(d, preds, {var}, f"{var}_quantized")
        variants.append(("Univariate categorical " + " and ".join(quantized), d, preds))
    if args.square:
        v1, v2, b, c = _parse_square_spec(args.square)
        _, aug = square_uplift(ds, v1, v2, n_split=b, n_min=args.square_n_min, nb_group=c)
        aug = UpliftDataset(aug.frame.drop(columns=[f"Uplift_{v1}_{v2}"]), aug.outcome, aug.treat)
        d, preds = _replace_with_dummies(aug, base_predictors, {v1, v2}, f"Cat_{v1}_{v2}")
        variants.append((f"Bivariate categorical {v1} and {v2}", d, preds))

    cfg = SplitConfig(p=args.p, strata=(ds.treat, ds.outcome), seed=args.seed)
    rows = []

    def evaluate(name, tag, selection, model, valid, predict):
        scored = valid.with_columns(**{PREDICTION: predict(model, valid)})
        summary = _qini_artifacts(out, scored, PREDICTION, args.nb_group, tag=tag)
        save_model(model, out.path("models", f"{tag}.json"))
        rows.append({"model": name, "feature_selection": selection, "qini": summary["qini"],
                     "qini_raw": summary["qini_raw"]})

    train, valid = split_uplift(ds, cfg)
    evaluate("Baseline (two-model)", "baseline_dual", "No", dual_uplift_fit(train, base_predictors), valid, dual_predict)
    evaluate("Baseline (interaction)", "baseline_inter", "No",
             inter_uplift_fit(train, base_predictors, input_mode="all"), valid, inter_predict)

    selections = {}
    for k, (name, data, preds) in enumerate(variants):
        train, valid = split_uplift(data, cfg)
        scan = best_features(train, preds, nb_lambda=args.nb_lambda, nb_group=args.nb_group)
        out.csv(f"lambda_scan_{k}.csv", scan.to_frame())
        model = refit_selected(train, scan.selected_terms)
        label = "No quantization" if name == "Baseline" else name
        evaluate(label, f"selected_{k}", "Yes", model, valid, inter_predict)
        selections[label] = scan.selected_terms

    comparison = pd.DataFrame(rows)
    out.csv("comparison.csv", comparison)
    out.json("models", "selected_terms.json", selections)
    print(comparison.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return {
        "command": "pipeline",
        "seed": args.seed,
        "overall_uplift": overall_uplift(ds),
        "comparison": rows,
        "selected_terms": selections,
    }


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--outcome", default="y", help="binary outcome column")
    p.add_argument("--treat", default="treat", help="binary treatment column")
    p.add_argument("--dummies", default="auto",
                   help="categorical columns to dummy-encode (comma list), 'auto' for all, '' for none")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upliftkit", description="Regression-based uplift modeling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/validation split")
    _common(p)
    p.add_argument("--p", type=float, default=0.7, help="fraction of each stratum sent to train")
    p.add_argument("--strata", default="", help="stratification columns (default: treat,outcome)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("fit", help="fit a two-model or interaction estimator")
    _common(p)
    p.add_argument("--estimator", choices=["dual", "inter"], default="dual")
    p.add_argument("--predictors", default="", help="comma list (default: every numeric feature)")
    p.add_argument("--terms", default="", help="explicit interaction-model terms (selected features)")
    p.add_argument("--model-name", default="model.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="append uplift_prediction to a dataset")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--output-name", default="predictions.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="Qini table, curve, bars and coefficient")
    _common(p)
    p.add_argument("--prediction", default=PREDICTION)
    p.add_argument("--nb-group", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select", help="lasso path with Qini-maximizing penalty")
    _common(p)
    p.add_argument("--predictors", default="")
    p.add_argument("--nb-lambda", type=int, default=100)
    p.add_argument("--nb-group", type=int, default=10)
    p.add_argument("--validation", action="store_true")
    p.add_argument("--p", type=float, default=0.3, help="held-out fraction when --validation is set")
    p.add_argument("--report-value", action="store_true", help="print the best lambda and its Qini")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bin", help="univariate supervised quantization")
    _common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--n-split", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--n-min", type=int, default=30)
    p.add_argument("--categorical", action="store_true", help="rank a categorical column by uplift first")
    p.set_defaults(func=cmd_bin, dummies="")

    p = sub.add_parser("square", help="bivariate supervised quantization")
    _common(p)
    p.add_argument("--var1", required=True)
    p.add_argument("--var2", required=True)
    p.add_argument("--n-split", type=int, default=10)
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--nb-group", type=int, default=3)
    p.set_defaults(func=cmd_square)

    p = sub.add_parser("squarecv", help="choose (b, c) of the bivariate quantization by held-out Qini")
    _common(p)
    p.add_argument("--var1", required=True)
    p.add_argument("--var2", required=True)
    p.add_argument("--b-grid", default="2,3,4,5")
    p.add_argument("--c-grid", default="2,3,4")
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--nb-group", type=int, default=10)
    p.set_defaults(func=cmd_squarecv)

    p = sub.add_parser("pipeline", help="split, fit, select, refit and compare models")
    _common(p)
    p.add_argument("--predictors", default="")
    p.add_argument("--p", type=float, default=0.7)
    p.add_argument("--nb-group", type=int, default=5)
    p.add_argument("--nb-lambda", type=int, default=100)
    p.add_argument("--n-min", type=int, default=30)
    p.add_argument("--bin", action="append", help="var:n_split:alpha, repeatable")
    p.add_argument("--square", default="", help="var1,var2:b:c")
    p.add_argument("--square-n-min", type=int, default=1)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _module_of(exc: BaseException) -> str:
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        path = Path(frame.filename)
        if path.parent.name == "upliftkit":
            return path.stem
    return "cli"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Out(args.out)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UpliftWarning)
        try:
            doc = args.func(args, out)
        except (ValueError, KeyError, OSError, np.linalg.LinAlgError) as exc:
            print(f"upliftkit {args.command}: error in {_module_of(exc)}: {exc}", file=sys.stderr)
            return 2
    notes = [str(w.message) for w in caught if issubclass(w.category, UpliftWarning)]
    for note in notes:
        print(f"upliftkit {args.command}: warning: {note}", file=sys.stderr)
    out.report({**doc, "warnings": notes})
    return 0


if __name__ == "__main__":
    sys.exit(main())
