"""
The rapidrisk command line. Every subcommand is a thin layer over the library;
exit codes are 0 on success, 2 on configuration errors, 3 on data errors and
4 when a synthesizer failed during cross-validation. The measured risk never
affects the exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _terms as terms
from ._core import ConfigurationError, DataError, derive_seed
from .attribution import INTERACTION_ORDERS, NO_INTERACTIONS, fit_attribution, stratify_flags
from .calibration import (
    PERMUTE_ORIGINAL,
    PERMUTE_RELEASED,
    default_tau_grid,
    parse_grid,
    permutation_null_threshold,
    replicate_curve,
    threshold_curve,
)
from .dataset import Dataset, Schema, dumps_csv, load_csv, load_schema, write_csv
from .interfaces import RapidSettings, load_settings
from .learners import FAMILY_ALIASES, AttackerSpec
from .report import (
    AssessmentReport,
    OutputError,
    describe_inputs,
    high_risk_records,
    read_flags,
    record_rows,
    render_details,
    render_summary,
    result_block,
    write_records,
)
from .risk import (
    METRICS,
    AllRecords,
    Holdout,
    RapidResult,
    aggregate_multi_model,
    aggregate_replicates,
    baseline_marginals,
    metric_from_name,
    rapid_assess,
    rapid_categorical,
    rapid_continuous,
)
from .simgen import SimConfig, generate, kappa_sweep, threshold_sweep
from .synthesizer import (
    FoldFailures,
    SynthesisPlan,
    cart_synthesizer,
    command_synthesizer,
    rapid_synthesizer_cv,
    synthesize_cart,
)
from .uncertainty import bootstrap_ci, clopper_pearson_interval, wilson_interval

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIGURATION = 2
EXIT_DATA = 3
EXIT_FOLD_FAILURES = 4

INTERNAL_CART = "internal-cart"
PROB_PREFIX = "p_"
DEFAULT_GRID = "0.05:0.95:0.05"


def _split(raw: Optional[str]) -> Optional[List[str]]:
    if raw is None:
        return None
    return [part.strip() for part in raw.split(",") if part.strip()]


def _settings(args: argparse.Namespace) -> RapidSettings:
    settings = load_settings(args.config)
    return settings.updated(
        tau=getattr(args, "tau", None),
        epsilon=getattr(args, "epsilon", None),
        metric=getattr(args, "metric", None),
        delta=getattr(args, "delta", None),
        bootstrap=getattr(args, "boot", None),
        attackers=getattr(args, "attacker", None),
        n_trees=getattr(args, "n_trees", None),
        seed=getattr(args, "seed", None),
        threads=args.threads,
    )


def _schema(args: argparse.Namespace) -> Optional[Schema]:
    return load_schema(args.schema) if getattr(args, "schema", None) else None


def _roles(args: argparse.Namespace, original: Dataset) -> Tuple[List[str], str]:
    sensitive = args.sensitive or original.schema.sensitive
    if sensitive is None:
        args._parser.error("the following arguments are required: --sensitive")
    qi = _split(args.qi) or original.schema.quasi_identifiers
    if not qi:
        qi = [name for name in original.names if name != sensitive]
    return qi, sensitive


def _read_ids(path: str) -> List[int]:
    ids = []
    with open(path, encoding="utf-8") as file:
        for i, line in enumerate(file):
            cell = line.strip().split(",")[0]
            if not cell:
                continue
            try:
                ids.append(int(cell))
            except ValueError:
                if i:
                    raise DataError(f"Holdout id {cell!r} in {path} is not an integer.")
    return ids


def _mode(args: argparse.Namespace) -> Any:
    if args.mode == terms.HOLDOUT:
        if not args.holdout_ids:
            raise ConfigurationError("--mode holdout needs --holdout-ids.")
        return Holdout(_read_ids(args.holdout_ids))
    return AllRecords()


def _spec(settings: RapidSettings, family: str, seed: int) -> AttackerSpec:
    return AttackerSpec(family, n_trees=settings.n_trees, seed=seed)


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer, lineterminator="\n")
    header = list(rows[0].keys()) if rows else []
    writer.writerow(header)
    writer.writerows([[row[h] for h in header] for row in rows])
    return buffer.getvalue()


def _precomputed(path: str, args: argparse.Namespace, settings: RapidSettings) -> RapidResult:
    """
    Scores a table of precomputed attacker outputs. Categorical tables hold
    true_value and one p_<class> column per class, with baselines from a b
    column or from --original; continuous tables hold true_value and
    prediction.
    """
    with open(path, encoding="utf-8", newline="") as file:
        rows = list(csv.DictReader(file))
    if not rows or terms.TRUE_VALUE not in rows[0]:
        raise DataError(f"{path} needs a {terms.TRUE_VALUE} column.")
    ids = [int(r[terms.ROW]) for r in rows] if terms.ROW in rows[0] else None
    if terms.PREDICTION in rows[0]:
        return rapid_continuous(
            [float(r[terms.PREDICTION]) for r in rows],
            [float(r[terms.TRUE_VALUE]) for r in rows],
            settings.epsilon,
            metric_from_name(settings.metric, settings.delta),
            rows=ids,
        )
    classes = [c[len(PROB_PREFIX):] for c in rows[0] if c.startswith(PROB_PREFIX)]
    if not classes:
        raise DataError(f"{path} has neither a prediction column nor p_<class> columns.")
    y_true = [r[terms.TRUE_VALUE] for r in rows]
    probs = np.array([[float(r[PROB_PREFIX + c]) for c in classes] for r in rows])
    if terms.B in rows[0]:
        baselines: Dict[str, float] = {}
        for label, r in zip(y_true, rows):
            b = float(r[terms.B])
            if baselines.setdefault(label, b) != b:
                raise DataError(f"Class {label!r} has more than one baseline in {path}.")
    elif args.original:
        original = load_csv(args.original, _schema(args))
        _, sensitive = _roles(args, original)
        baselines = baseline_marginals(original.labels(sensitive))
    else:
        raise ConfigurationError("--probs-in without a b column needs --original for baselines.")
    return rapid_categorical(probs, y_true, baselines, settings.tau, classes, ids)


def _intervals(result: RapidResult, settings: RapidSettings) -> Dict[str, Any]:
    out = {
        "wilson": wilson_interval(result.n_at_risk, result.n_evaluated, settings.level).to_dict(),
        "clopper_pearson": clopper_pearson_interval(
            result.n_at_risk, result.n_evaluated, settings.level
        ).to_dict(),
    }
    if settings.bootstrap > 0:
        out["bootstrap"] = bootstrap_ci(
            result.flags, settings.bootstrap, settings.level, settings.seed, settings.threads
        ).to_dict()
    return out


def _assess_all(
    args: argparse.Namespace, settings: RapidSettings
) -> Tuple[List[Tuple[str, int, RapidResult]], Dict[str, Any]]:
    schema = _schema(args)
    original = load_csv(args.original, schema)
    released = [load_csv(p, schema) for p in args.released]
    qi, sensitive = _roles(args, original)
    mode = _mode(args)
    metric = metric_from_name(settings.metric, settings.delta)
    runs = []
    for family in settings.attackers:
        spec = _spec(settings, family, settings.seed)
        for i, rel in enumerate(released):
            result = rapid_assess(
                original,
                rel,
                qi,
                sensitive,
                spec,
                settings.tau,
                settings.epsilon,
                metric,
                mode=mode,
                baseline=args.baseline,
                threads=settings.threads,
            )
            logger.info("%s on replicate %d: RAPID %.4f.", spec.family, i, result.score)
            runs.append((spec.family, i, result))
    config = {
        **settings.to_dict(),
        "qi": qi,
        terms.SENSITIVE: sensitive,
        terms.MODE: mode.name,
        terms.BASELINE: args.baseline,
    }
    return runs, config


def cmd_assess(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    settings = _settings(args)
    if args.probs_in:
        runs = [("precomputed", 0, _precomputed(args.probs_in, args, settings))]
        config: Dict[str, Any] = settings.to_dict()
    else:
        if not args.original or not args.released:
            args._parser.error("--original and at least one --released are required")
        runs, config = _assess_all(args, settings)

    assessments = []
    for family, i, result in runs:
        assessments.append(
            {terms.FAMILY: family, terms.REPLICATE: i, **result_block(result, _intervals(result, settings))}
        )
    results: Dict[str, Any] = {"assessments": assessments}
    families = list(dict.fromkeys(f for f, _, _ in runs))
    per_family = {f: [res for g, _, res in runs if g == f] for f in families}
    if any(len(v) > 1 for v in per_family.values()):
        results[terms.REPLICATES] = {f: aggregate_replicates(v).to_dict() for f, v in per_family.items()}
    if len(families) > 1:
        for i in range(len(per_family[families[0]])):
            envelope = aggregate_multi_model([per_family[f][i] for f in families])
            results.setdefault(terms.ENVELOPE, []).append({terms.REPLICATE: i, **envelope.to_dict()})
    headline = [res for _, _, res in runs]
    results[terms.SCORE] = float(np.mean([res.score for res in headline]))

    if args.records_out:
        rows = []
        for family, i, result in runs:
            extra = {terms.FAMILY: family, terms.REPLICATE: i} if len(runs) > 1 else {}
            rows.extend(record_rows(result, **extra))
        write_records(rows, args.records_out)

    first = runs[0][2]
    print(render_details(first) if args.details else render_summary(first))
    if len(runs) > 1:
        print(f"Mean risk level across {len(runs)} assessments: {results[terms.SCORE] * 100:.1f} %")
    if args.details:
        for rec in high_risk_records(first, args.top):
            print("  " + ", ".join(f"{k}={v}" for k, v in rec.to_dict().items()))

    report = AssessmentReport(
        command="assess",
        inputs=describe_inputs(original=args.original, released=args.released or None, probs_in=args.probs_in),
        config=config,
        results=results,
        records=args.records_out,
        timing={terms.SECONDS: time.perf_counter() - start},
    )
    if args.report:
        report.write(args.report)
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    settings = _settings(args)
    grid = parse_grid(args.grid) if args.grid is not None else default_tau_grid()
    runs, _ = _assess_all(args, settings.updated(attackers=settings.attackers[:1]))
    results = [res for _, _, res in runs]
    curve = replicate_curve(results, grid) if len(results) > 1 else threshold_curve(results[0], grid)
    _emit(_rows_to_csv(curve.rows()), args.out)
    return EXIT_OK


def cmd_cv(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    settings = _settings(args)
    schema = _schema(args)
    original = load_csv(args.original, schema)
    qi, sensitive = _roles(args, original)
    if args.synth_cmd:
        synthesize = command_synthesizer(args.synth_cmd, args.timeout)
        synth_name = args.synth_cmd
    else:
        synthesize = cart_synthesizer(SynthesisPlan(seed=settings.seed))
        synth_name = INTERNAL_CART
    cv = rapid_synthesizer_cv(
        original,
        synthesize,
        qi,
        sensitive,
        k=args.k,
        spec=_spec(settings, settings.attackers[0], settings.seed),
        tau=settings.tau,
        epsilon=settings.epsilon,
        metric=metric_from_name(settings.metric, settings.delta),
        rng_seed=settings.seed,
        level=settings.level,
        threads=settings.threads,
    )
    pct = int(round(settings.level * 100))
    print(f"Mean RAPID: {cv.mean:.4f}")
    print(f"SD: {cv.sd:.4f}")
    print(f"{pct}% CI: [{cv.normal_ci[0]:.4f}, {cv.normal_ci[1]:.4f}]")
    print("Fold scores: " + ", ".join(f"{s:.4f}" for s in cv.fold_scores))
    if args.report:
        AssessmentReport(
            command="cv",
            inputs=describe_inputs(original=args.original),
            config={**settings.to_dict(), "qi": qi, terms.SENSITIVE: sensitive, "synthesizer": synth_name},
            results=cv.to_dict(),
            timing={terms.SECONDS: time.perf_counter() - start},
        ).write(args.report)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    data = generate(SimConfig(n=args.n, kappa=args.kappa, seed=seed))
    if args.out:
        write_csv(data, args.out)
    else:
        sys.stdout.write(dumps_csv(data))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = _settings(args)
    kappas = parse_grid(args.kappas)
    spec = _spec(settings, settings.attackers[0], settings.seed)
    if args.taus:
        table = threshold_sweep(
            kappas, parse_grid(args.taus), args.n, args.reps, spec, seed=settings.seed, threads=settings.threads
        )
    else:
        table = kappa_sweep(
            kappas, args.n, args.reps, spec, settings.tau, seed=settings.seed, threads=settings.threads
        )
    if args.runs_out:
        table.to_csv(args.runs_out, "runs")
    _emit(_rows_to_csv(list(table.summary)), args.out)
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    settings = _settings(args)
    original = load_csv(args.original, _schema(args))
    plan = SynthesisPlan(
        visit_order=_split(args.visit_order), m=args.m, min_leaf=args.min_leaf, cp=args.cp, seed=settings.seed
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, data in enumerate(synthesize_cart(original, plan, settings.threads), start=1):
        path = out_dir / f"{args.prefix}_{i}.csv"
        write_csv(data, path)
        print(path)
    return EXIT_OK


def _conditioning(raw: Optional[Sequence[str]]) -> Dict[str, List[float]]:
    out = {}
    for item in raw or []:
        name, _, values = item.partition("=")
        if not values:
            raise ConfigurationError(f"--condition expects name=v1,v2,..., got {item!r}.")
        try:
            out[name.strip()] = [float(v) for v in _split(values) or []]
        except ValueError:
            raise ConfigurationError(f"--condition values for {name!r} must be numbers.")
    return out


def _bins(raw: Optional[Sequence[str]]) -> Dict[str, int]:
    out = {}
    for item in raw or []:
        name, _, count = item.partition("=")
        try:
            out[name.strip()] = int(count)
        except ValueError:
            raise ConfigurationError(f"--bins expects name=count, got {item!r}.")
    return out


def cmd_attribute(args: argparse.Namespace) -> int:
    original = load_csv(args.original, _schema(args))
    flags_by_row = read_flags(args.records)
    rows = sorted(flags_by_row)
    flags = [flags_by_row[r] for r in rows]
    lookup = {rid: i for i, rid in enumerate(original.row_ids.tolist())}
    missing = [r for r in rows if r not in lookup]
    if missing:
        raise DataError(f"{len(missing)} record rows are not rows of {args.original}.")
    scored = original.take([lookup[r] for r in rows])
    qi = _split(args.qi) or original.schema.quasi_identifiers
    if not qi:
        raise ConfigurationError("--qi is required when the schema names no quasi-identifiers.")
    if args.by:
        strata = stratify_flags(rows, flags, original, _split(args.by) or [], _bins(args.bins))
        if args.strata_out:
            strata.to_csv(args.strata_out)
    model = fit_attribution(flags, scored, qi, args.interactions, _conditioning(args.condition))
    if args.grid_out:
        model.grid_to_csv(args.grid_out)
    _emit(_rows_to_csv(model.rows()), args.out)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    settings = _settings(args)
    if len(args.released) != 1:
        raise ConfigurationError("calibrate takes exactly one --released file.")
    schema = _schema(args)
    original = load_csv(args.original, schema)
    released = load_csv(args.released[0], schema)
    qi, sensitive = _roles(args, original)
    null = permutation_null_threshold(
        original,
        released,
        qi,
        sensitive,
        _spec(settings, settings.attackers[0], settings.seed),
        n_perm=args.n_perm,
        quantile=args.quantile,
        grid=parse_grid(args.grid) if args.grid is not None else None,
        rng_seed=derive_seed(settings.seed, 1),
        permute=args.permute,
        threads=settings.threads,
    )
    if null.found:
        print(f"Selected threshold (tau): {null.selected_threshold:g}")
    else:
        print("No threshold beats the permutation null.")
    if args.out:
        rows = [
            {terms.THRESHOLD: t, "observed": o, "null_quantile": q}
            for t, o, q in zip(null.grid.tolist(), null.observed.tolist(), null.null_quantiles.tolist())
        ]
        Path(args.out).write_text(_rows_to_csv(rows), encoding="utf-8")
    if args.report:
        AssessmentReport(
            command="calibrate",
            inputs=describe_inputs(original=args.original, released=args.released),
            config={**settings.to_dict(), "qi": qi, terms.SENSITIVE: sensitive, "n_perm": args.n_perm},
            results=null.to_dict(),
        ).write(args.report)
    return EXIT_OK


def _add_data_args(p: argparse.ArgumentParser, released: bool = True) -> None:
    p.add_argument("--original", help="CSV of the original records.")
    if released:
        p.add_argument(
            "--released", action="append", default=[], help="CSV of a released replicate (repeatable)."
        )
    p.add_argument("--schema", help="JSON schema file for the CSVs.")
    p.add_argument("--qi", help="Comma separated quasi-identifier columns.")
    p.add_argument("--sensitive", help="The sensitive column.")


def _add_risk_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--attacker", action="append", choices=sorted(FAMILY_ALIASES), help="Attacker family (repeatable)."
    )
    p.add_argument("--n-trees", type=int, help="Trees per random forest.")
    p.add_argument("--tau", type=float, help="Normalized-gain threshold.")
    p.add_argument("--epsilon", type=float, help="Continuous error tolerance.")
    p.add_argument("--metric", choices=sorted(METRICS), help="Continuous error metric.")
    p.add_argument("--delta", type=float, help="Relative-error smoothing constant.")
    p.add_argument("--seed", type=int, help="Master seed.")


def _add_mode_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["all", terms.HOLDOUT], default="all")
    p.add_argument("--holdout-ids", help="File of original row indices to score, one per line.")
    p.add_argument(
        "--baseline",
        choices=[terms.BASELINE_FULL, terms.BASELINE_TARGET],
        default=terms.BASELINE_FULL,
        help="Baseline marginals from all original records or only the scored ones.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rapidrisk", description="Attribute-inference disclosure risk of released microdata."
    )
    parser.add_argument("--config", help="TOML settings file with a [rapidrisk] table.")
    parser.add_argument("--threads", type=int, help="Worker threads (default: RAPID_THREADS or all cores).")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="Measure RAPID of released data.")
    _add_data_args(p)
    _add_risk_args(p)
    _add_mode_args(p)
    p.add_argument("--boot", type=int, help="Bootstrap replicates (0 disables).")
    p.add_argument("--probs-in", help="CSV of precomputed attacker outputs to score directly.")
    p.add_argument("--records-out", help="Per-record table (.csv or .jsonl).")
    p.add_argument("--report", help="JSON report path.")
    p.add_argument("--details", action="store_true", help="Print details and the highest-risk records.")
    p.add_argument("--top", type=int, default=10, help="High-risk records listed with --details.")
    p.set_defaults(func=cmd_assess, _parser=p)

    p = sub.add_parser("curve", help="RAPID across a threshold grid.")
    _add_data_args(p)
    _add_risk_args(p)
    _add_mode_args(p)
    p.add_argument("--grid", help=f"start:stop:step or comma list (default {DEFAULT_GRID}).")
    p.add_argument("--out", help="Curve CSV path (default stdout).")
    p.set_defaults(func=cmd_curve, _parser=p)

    p = sub.add_parser("cv", help="Cross-validated risk of a synthesizer.", allow_abbrev=False)
    _add_data_args(p, released=False)
    _add_risk_args(p)
    p.add_argument("--k", type=int, default=5, help="Number of folds.")
    p.add_argument(
        "--synth-cmd",
        help="External synthesizer command (CSV on stdin and stdout). Defaults to internal CART.",
    )
    p.add_argument("--timeout", type=float, help="Seconds allowed per external synthesizer run.")
    p.add_argument("--report", help="JSON report path.")
    p.set_defaults(func=cmd_cv, _parser=p)

    p = sub.add_parser("simulate", help="Generate simulated health microdata.")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path (default stdout).")
    p.set_defaults(func=cmd_simulate, _parser=p)

    p = sub.add_parser("sweep", help="RAPID across dependency strengths.")
    p.add_argument("--kappas", required=True, help="start:stop:step or comma list.")
    p.add_argument("--taus", help="Also sweep tau over this grid.")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10)
    _add_risk_args(p)
    p.add_argument("--runs-out", help="Per-run CSV path.")
    p.add_argument("--out", help="Summary CSV path (default stdout).")
    p.set_defaults(func=cmd_sweep, _parser=p)

    p = sub.add_parser("synthesize", help="Sequential CART synthesis.")
    p.add_argument("--original", required=True)
    p.add_argument("--schema")
    p.add_argument("--m", type=int, default=5, help="Number of replicates.")
    p.add_argument("--visit-order", help="Comma separated column order.")
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--cp", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--prefix", default="synthetic")
    p.set_defaults(func=cmd_synthesize, _parser=p)

    p = sub.add_parser("attribute", help="Attribute risk flags to quasi-identifiers.")
    p.add_argument("--original", required=True)
    p.add_argument("--records", required=True, help="Per-record table written by assess.")
    p.add_argument("--schema")
    p.add_argument("--qi")
    p.add_argument("--interactions", choices=sorted(INTERACTION_ORDERS), default=NO_INTERACTIONS)
    p.add_argument("--condition", action="append", help="name=v1,v2 conditioning values (repeatable).")
    p.add_argument("--by", help="Comma separated stratification columns.")
    p.add_argument("--bins", action="append", help="name=count bins for continuous --by columns.")
    p.add_argument("--strata-out", help="Stratified rates CSV path.")
    p.add_argument("--grid-out", help="Predicted log-odds grid CSV path.")
    p.add_argument("--out", help="Coefficient CSV path (default stdout).")
    p.set_defaults(func=cmd_attribute, _parser=p)

    p = sub.add_parser("calibrate", help="Permutation-null threshold selection.")
    _add_data_args(p)
    _add_risk_args(p)
    p.add_argument("--n-perm", type=int, default=100)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--grid")
    p.add_argument("--permute", choices=[PERMUTE_RELEASED, PERMUTE_ORIGINAL], default=PERMUTE_RELEASED)
    p.add_argument("--out", help="Observed and null curve CSV path.")
    p.add_argument("--report", help="JSON report path.")
    p.set_defaults(func=cmd_calibrate, _parser=p)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args.verbose)
        return int(args.func(args))
    except SystemExit as e:
        return int(e.code or 0) if not isinstance(e.code, str) else EXIT_CONFIGURATION
    except FoldFailures as e:
        sys.stderr.write(f"rapidrisk: {e}\n")
        return EXIT_FOLD_FAILURES
    except (ConfigurationError, OutputError) as e:
        sys.stderr.write(f"rapidrisk: configuration error: {e}\n")
        return EXIT_CONFIGURATION
    except (DataError, OSError) as e:
        sys.stderr.write(f"rapidrisk: data error: {e}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
