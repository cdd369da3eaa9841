"""Command-line front end: pmf tables, moments, estimators, samplers and verification suites."""

import argparse
import csv
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from gibbs_occ.combinatorics import aff_vectors, compositions, count_compositions, format_number
from gibbs_occ.config import get_settings
from gibbs_occ.errors import (
    EXIT_OK,
    EXIT_STATISTICAL,
    EXIT_USAGE,
    ContractError,
    DomainError,
    GibbsOccError,
    InstanceTooLargeError,
    error_payload,
    exit_code_for,
)
from gibbs_occ.estimate import (
    Estimate,
    SampleSummary,
    alt_gamma,
    alt_n,
    approx_mle_n,
    mle_gamma,
    mle_n,
)
from gibbs_occ.logging_config import setup_logging
from gibbs_occ.occupancy import (
    aff_factorial_moments,
    aff_pmf,
    component_pmf,
    joint_pmf,
    k_factorial_moments,
    partialsum_pmf,
    pnk_pmf,
)
from gibbs_occ.sample import (
    sample_occupancy_batch,
    sample_occupancy_rejection_batch,
    sample_subordinator,
    sample_xi_batch,
    star_biased_estimate,
)
from gibbs_occ.schemas import (
    BiasedEstimateOut,
    EstimateOut,
    MomentOut,
    PmfRow,
    PmfTable,
    RunConfig,
    SubordinatorOut,
    json_number,
)
from gibbs_occ.starlimit import STATISTICS, StarConfig, analytic_target, star_aff_moments, star_aff_pmf, star_pnk_pmf
from gibbs_occ.verify import run_identity_suite, run_montecarlo_suite
from gibbs_occ.weights import WeightSequence, parse_family

logger = logging.getLogger(__name__)

PMF_KINDS = ("joint", "component", "partial", "pnk", "aff", "star-pnk", "star-aff")
MOMENT_KINDS = ("aff", "k", "star-aff")


def parse_int_list(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        return [int(item) for item in text.replace(";", ",").split(",") if item.strip()]
    except ValueError:
        raise ContractError(f"cannot parse integer list {text!r}") from None


def _require(value: Any, name: str) -> Any:
    if value is None:
        raise ContractError(f"--{name} is required for this command")
    return value


# Document builders (shared with the HTTP layer)


def build_pmf_table(cfg: RunConfig, kind: str, m: Optional[int] = None, counts: Optional[Sequence[int]] = None,
                    aff: Optional[Sequence[int]] = None) -> PmfTable:
    """Evaluate a law and package it as a table."""
    if kind not in PMF_KINDS:
        raise DomainError(f"unknown pmf kind {kind!r}", allowed=",".join(PMF_KINDS))
    w = parse_family(cfg.family)
    exact = cfg.exact
    params: Dict[str, Any] = {}
    rows: List[PmfRow] = []

    if kind.startswith("star-"):
        gamma = _require(cfg.number(cfg.gamma), "gamma")
        k = _require(cfg.k, "k")
        star = StarConfig(gamma, max(k, 1))
        params.update(gamma=json_number(gamma), k=k)
        if kind == "star-pnk":
            law = star_pnk_pmf(w, star, k, exact)
            rows = [PmfRow(value=p, probability=json_number(q)) for p, q in law.rows()]
        else:
            vectors = [tuple(aff)] if aff else list(aff_vectors(k))
            rows = [PmfRow(value=list(a), probability=json_number(star_aff_pmf(w, star, a, exact))) for a in vectors]
        return PmfTable(kind=kind, family=w.to_spec(), parameters=params, exact=exact, rows=rows)

    theta = _require(cfg.number(cfg.theta), "theta")
    params["theta"] = json_number(theta)
    if kind == "joint":
        if counts:
            n, k = len(counts), sum(counts)
            vectors = [tuple(counts)]
        else:
            n, k = _require(cfg.n, "n"), _require(cfg.k, "k")
            size = count_compositions(k, n)
            if size > get_settings().oracle_max_compositions:
                raise InstanceTooLargeError(f"{size} compositions are too many to tabulate", n=n, k=k)
            vectors = list(compositions(k, n))
        params.update(n=n, k=k)
        rows = [PmfRow(value=list(c), probability=json_number(joint_pmf(w, theta, n, k, c, exact))) for c in vectors]
        return PmfTable(kind=kind, family=w.to_spec(), parameters=params, exact=exact, rows=rows)

    n, k = _require(cfg.n, "n"), _require(cfg.k, "k")
    params.update(n=n, k=k)
    if kind == "component":
        law = component_pmf(w, theta, n, k, exact)
    elif kind == "partial":
        params["m"] = _require(m, "m")
        law = partialsum_pmf(w, theta, n, m, k, exact)
    elif kind == "pnk":
        law = pnk_pmf(w, theta, n, k, exact)
    else:
        vectors = [tuple(aff)] if aff else list(aff_vectors(k))
        rows = [
            PmfRow(value=list(a), probability=json_number(aff_pmf(w, theta, n, k, a, sum(a), exact)))
            for a in vectors
        ]
        return PmfTable(kind=kind, family=w.to_spec(), parameters=params, exact=exact, rows=rows)
    rows = [PmfRow(value=v, probability=json_number(q)) for v, q in law.rows()]
    return PmfTable(kind=kind, family=w.to_spec(), parameters=params, exact=exact, rows=rows)


def build_moment(cfg: RunConfig, kind: str, vector: Sequence[int]) -> MomentOut:
    if kind not in MOMENT_KINDS:
        raise DomainError(f"unknown moment kind {kind!r}", allowed=",".join(MOMENT_KINDS))
    w = parse_family(cfg.family)
    k = _require(cfg.k, "k")
    if kind == "star-aff":
        gamma = _require(cfg.number(cfg.gamma), "gamma")
        value = star_aff_moments(w, StarConfig(gamma, max(k, 1)), k, vector, cfg.exact)
        params = {"gamma": json_number(gamma), "k": k, "r": list(vector)}
    else:
        theta = _require(cfg.number(cfg.theta), "theta")
        n = _require(cfg.n, "n")
        fn = aff_factorial_moments if kind == "aff" else k_factorial_moments
        value = fn(w, theta, n, k, vector, cfg.exact)
        params = {"theta": json_number(theta), "n": n, "k": k, ("r" if kind == "aff" else "l"): list(vector)}
    return MomentOut(kind=kind, family=w.to_spec(), parameters=params, value=json_number(value), exact=cfg.exact)


def _estimate_out(target: str, est: Estimate) -> EstimateOut:
    return EstimateOut(
        target=target,
        method=est.method.value,
        value=json_number(est.value),
        boundary=est.boundary,
        residual=est.residual,
        diagnostics={key: json_number(v) if isinstance(v, float) else v for key, v in est.diagnostics.items()},
    )


def build_estimate(family: str, target: str, k: int, P: int, method: str = "mle", theta: Optional[str] = None,
                   exact: bool = False) -> EstimateOut:
    w = parse_family(family)
    s = SampleSummary(k, P)
    if target == "n":
        theta_value = _require(theta, "theta")
        theta_value = RunConfig(family=family, theta=theta_value, mode="exact" if exact else "log").number(theta_value)
        if method == "mle":
            return _estimate_out(target, mle_n(w, theta_value, s))
        if method == "approx":
            return _estimate_out(target, approx_mle_n(w, theta_value, s))
        return _estimate_out(target, alt_n(w, theta_value, s, exact))
    if target == "gamma":
        if method == "mle":
            return _estimate_out(target, mle_gamma(w, s))
        if method == "ratio":
            return _estimate_out(target, alt_gamma(w, s, exact))
        raise DomainError("gamma estimators are mle or ratio", method=method)
    raise DomainError(f"unknown estimation target {target!r}")


# Output


def _emit_json(document: Any) -> None:
    if hasattr(document, "model_dump"):
        document = document.model_dump()
    sys.stdout.write(json.dumps(document, indent=2) + "\n")


def _emit_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)


def _csv_cell(value: Any) -> str:
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return format_number(value)


def _run_config(args: argparse.Namespace, star: bool = False) -> RunConfig:
    return RunConfig(
        family=args.family,
        star=star,
        theta=getattr(args, "theta", None),
        gamma=getattr(args, "gamma", None),
        n=getattr(args, "n", None),
        k=getattr(args, "k", None),
        mode="exact" if getattr(args, "exact", False) else "log",
        format=getattr(args, "format", "json"),
        seed=args.seed if getattr(args, "seed", None) is not None else get_settings().default_seed,
        runs=getattr(args, "runs", None) or 10_000,
    )


# Commands


def cmd_pmf(args: argparse.Namespace) -> int:
    parse_family(args.family)
    cfg = _run_config(args, star=args.kind.startswith("star-"))
    table = build_pmf_table(cfg, args.kind, args.m, parse_int_list(args.counts), parse_int_list(args.aff))
    logger.info(f"pmf {args.kind} for {table.family}: {len(table.rows)} rows")
    if cfg.format == "csv":
        _emit_csv(["value", "probability"], [[_csv_cell(r.value), _csv_cell(r.probability)] for r in table.rows])
    else:
        _emit_json(table)
    return EXIT_OK


def cmd_moments(args: argparse.Namespace) -> int:
    parse_family(args.family)
    cfg = _run_config(args, star=args.kind == "star-aff")
    vector = _require(parse_int_list(args.r), "r")
    out = build_moment(cfg, args.kind, vector)
    if cfg.format == "csv":
        _emit_csv(["kind", "value"], [[out.kind, _csv_cell(out.value)]])
    else:
        _emit_json(out)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    out = build_estimate(args.family, args.target, args.k, args.P, args.method, args.theta, args.exact)
    logger.info(f"estimate {args.target} ({out.method}) for k={args.k}, P={args.P}: {out.value}")
    if args.format == "csv":
        _emit_csv(["target", "method", "value", "boundary"],
                  [[out.target, out.method, _csv_cell(out.value), out.boundary or ""]])
    else:
        _emit_json(out)
    return EXIT_OK


def _sample_occupancy(args: argparse.Namespace, w: WeightSequence, cfg: RunConfig) -> int:
    theta = _require(cfg.number(cfg.theta), "theta")
    n, k = _require(cfg.n, "n"), _require(cfg.k, "k")
    if args.method == "rejection":
        draws, rate = sample_occupancy_rejection_batch(w, theta, n, k, cfg.runs, args.x, cfg.seed)
    else:
        draws, rate = sample_occupancy_batch(w, theta, n, k, cfg.runs, cfg.seed), None
    distinct = np.count_nonzero(draws, axis=1)
    if cfg.format == "csv":
        _emit_csv([f"k{i + 1}" for i in range(n)] + ["p"],
                  [list(row) + [int(p)] for row, p in zip(draws.tolist(), distinct)])
        return EXIT_OK
    values, freq = np.unique(distinct, return_counts=True)
    _emit_json({
        "sampler": args.method,
        "family": w.to_spec(),
        "n": n,
        "k": k,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "acceptance": rate,
        "mean_p": float(distinct.mean()),
        "pnk_empirical": {str(int(v)): float(c) / cfg.runs for v, c in zip(values, freq)},
    })
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    w = parse_family(args.family)
    star = args.what in ("subordinator", "star-biased")
    cfg = _run_config(args, star=star)
    if args.what == "occupancy":
        return _sample_occupancy(args, w, cfg)
    if args.what == "xi":
        theta = float(_require(cfg.number(cfg.theta), "theta"))
        x = _require(args.x, "x")
        draws = sample_xi_batch(w, theta, x, cfg.runs, cfg.seed)
        if cfg.format == "csv":
            _emit_csv(["xi"], [[int(v)] for v in draws])
        else:
            _emit_json({"family": w.to_spec(), "theta": theta, "x": x, "runs": cfg.runs, "seed": cfg.seed,
                        "mean": float(draws.mean()), "zero_fraction": float(np.mean(draws == 0))})
        return EXIT_OK
    gamma = _require(cfg.number(cfg.gamma), "gamma")
    if args.what == "subordinator":
        path = sample_subordinator(w, StarConfig(gamma), args.cutoff, cfg.seed)
        if cfg.format == "csv":
            _emit_csv(["rank", "gamma_point", "jump"],
                      [[i + 1, repr(float(g)), repr(float(j))]
                       for i, (g, j) in enumerate(zip(path.gamma_points, path.jumps))])
        else:
            _emit_json(SubordinatorOut(
                gamma=path.gamma, cutoff=path.cutoff, count=path.count, total=path.total,
                truncation_bound=path.truncation_bound, finite_activity=path.finite_activity,
                jumps=[float(j) for j in path.jumps],
            ))
        return EXIT_OK
    k = _require(cfg.k, "k")
    star_cfg = StarConfig(gamma, max(k, 1))
    result = star_biased_estimate(w, star_cfg, k, args.statistic, args.cutoff, cfg.runs, cfg.seed,
                                  p=args.p, m=args.m, threads=args.threads)
    target = None
    if args.statistic != "rank-m-only" or w.levy_tail_support:
        target = analytic_target(w, star_cfg, k, args.statistic, p=args.p, m=args.m)
    out = BiasedEstimateOut(
        statistic=result.statistic, estimate=result.estimate, se=result.se, ess=result.ess,
        unweighted=result.unweighted, truncation_bound=result.truncation_bound, runs=result.runs,
        cutoff=result.cutoff, finite_activity=result.finite_activity, target=target,
    )
    if cfg.format == "csv":
        fields = list(out.model_fields)
        _emit_csv(fields, [[_csv_cell(getattr(out, f)) for f in fields]])
    else:
        _emit_json(out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite == "identities":
        report = run_identity_suite(args.k_max, args.family or None)
    else:
        seed = args.seed if args.seed is not None else get_settings().default_seed
        report = run_montecarlo_suite(seed, args.runs or 200_000)
    _emit_json(report.to_dict())
    return EXIT_OK if report.passed else EXIT_STATISTICAL


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = get_settings()
    uvicorn.run("gibbs_occ.main:app", host=args.host or settings.api_host, port=args.port or settings.api_port)
    return EXIT_OK


# Parser


def _add_common(parser: argparse.ArgumentParser, family_required: bool = True) -> None:
    parser.add_argument("--family", required=family_required, help="weight family, e.g. negbin:alpha=1/2")
    parser.add_argument("--format", choices=("csv", "json"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbs-occ", description="Gibbs-Poisson occupancy models")
    parser.add_argument("--log-level", default=None, help="console log level (default from settings)")
    commands = parser.add_subparsers(dest="command", required=True)

    pmf = commands.add_parser("pmf", help="probability tables")
    pmf.add_argument("kind", choices=PMF_KINDS)
    _add_common(pmf)
    pmf.add_argument("--theta")
    pmf.add_argument("--gamma")
    pmf.add_argument("--n", type=int)
    pmf.add_argument("--k", type=int)
    pmf.add_argument("--m", type=int, help="partial-sum length")
    pmf.add_argument("--counts", help="occupancy vector, comma separated")
    pmf.add_argument("--aff", help="frequency-of-frequencies vector, comma separated")
    pmf.add_argument("--exact", action="store_true", help="exact rational arithmetic")
    pmf.set_defaults(handler=cmd_pmf)

    moments = commands.add_parser("moments", help="factorial moments")
    moments.add_argument("kind", choices=MOMENT_KINDS)
    _add_common(moments)
    moments.add_argument("--theta")
    moments.add_argument("--gamma")
    moments.add_argument("--n", type=int)
    moments.add_argument("--k", type=int)
    moments.add_argument("--r", help="moment orders, comma separated")
    moments.add_argument("--exact", action="store_true")
    moments.set_defaults(handler=cmd_moments)

    estimate = commands.add_parser("estimate", help="estimate n or gamma from (k, P)")
    estimate.add_argument("target", choices=("n", "gamma"))
    _add_common(estimate)
    estimate.add_argument("--theta")
    estimate.add_argument("--k", type=int, required=True)
    estimate.add_argument("--P", type=int, required=True)
    estimate.add_argument("--method", choices=("mle", "ratio", "approx"), default="mle")
    estimate.add_argument("--exact", action="store_true")
    estimate.set_defaults(handler=cmd_estimate)

    sample = commands.add_parser("sample", help="seeded samplers")
    sample.add_argument("what", choices=("occupancy", "xi", "subordinator", "star-biased"))
    _add_common(sample)
    sample.add_argument("--theta")
    sample.add_argument("--gamma")
    sample.add_argument("--n", type=int)
    sample.add_argument("--k", type=int)
    sample.add_argument("--x", type=float, help="compound-Poisson tilt (rejection and xi samplers)")
    sample.add_argument("--method", choices=("exact", "rejection"), default="exact")
    sample.add_argument("--seed", type=int)
    sample.add_argument("--runs", type=int)
    sample.add_argument("--cutoff", type=float)
    sample.add_argument("--statistic", choices=STATISTICS, default="all-same-species")
    sample.add_argument("--p", type=int)
    sample.add_argument("--m", type=int)
    sample.add_argument("--threads", type=int)
    sample.set_defaults(handler=cmd_sample)

    verify = commands.add_parser("verify", help="identity and Monte Carlo suites")
    verify.add_argument("suite", choices=("identities", "montecarlo"))
    verify.add_argument("--family", action="append", help="family to include (repeatable)")
    verify.add_argument("--k-max", type=int, default=10)
    verify.add_argument("--seed", type=int)
    verify.add_argument("--runs", type=int)
    verify.set_defaults(handler=cmd_verify)

    serve = commands.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_level)
        return args.handler(args)
    except GibbsOccError as e:
        logger.error(f"{args.command} failed: {e.message}")
        sys.stderr.write(json.dumps(error_payload(e)) + "\n")
        return exit_code_for(e)
    except ValidationError as e:
        sys.stderr.write(json.dumps({"error": "usage_error", "message": str(e)}) + "\n")
        return EXIT_USAGE
    except (ValueError, ZeroDivisionError, OverflowError) as e:
        logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(json.dumps({"error": "domain_error", "message": str(e)}) + "\n")
        return EXIT_USAGE
