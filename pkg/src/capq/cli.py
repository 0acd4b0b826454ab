"""Command-line front end.

    capq analyze --config cfg.json [--data x.csv] [--format json|text] [--out FILE] [--seed N]
    capq mv-analyze --config cfg.json [--data xy.csv] ...
    capq fit --data x.csv [--families normal,gamma] ...
    capq oracle --config cfg.json [--data x.csv] [--n N] --seed N
    capq list-indices [--format json|text]

Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
4 numeric or domain failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import sys
from typing import NamedTuple

import numpy as np

from capq import __version__
from capq.classical import ProcessMoments
from capq.config import MV_INDICES, AnalysisConfig, load_config, request_label
from capq.dist_core import FAMILIES
from capq.errors import CapqError, ConfigError, DataError, DomainError, NumericError
from capq.inference import (AUTO_FAMILIES, Sample, bootstrap_ci, fit_model, mc_yield, resolve_model)
from capq.multivariate import (NOTE_VOLUME_EXPONENT, MvNormal, chen_mcp, ellipsoid_volume_ratio,
                               five_step_pipeline, mv_generalized, shahriari_vector)
from capq.registry import INDEX_REGISTRY, IndexContext, evaluate, resolve_params
from capq.report import IndexReport, index_entry, render_report
from capq.yield_based import yield_summary

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class Measurements(NamedTuple):
    values: np.ndarray  # n x v
    header: list
    path: str
    sha256: str

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def sample(self):
        if self.dim != 1:
            raise DataError(f"{self.path}: expected one numeric column, found {self.dim}")
        try:
            return Sample(self.values[:, 0], self.path)
        except DomainError as exc:
            raise DataError(f"{self.path}: {exc}") from None

    def info(self):
        return {"path": self.path, "n": self.n, "columns": list(self.header), "sha256": self.sha256}


def load_measurements(path) -> Measurements:
    """Read a comma-separated file with one header row.

    Every cell must parse as a finite number; offending lines are reported
    together.  Blank lines are skipped.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise DataError(f"{path} is not UTF-8 text") from None

    reader = csv.reader(text.splitlines())
    header = None
    rows, bad = [], []
    for lineno, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if header is None:
            header = [c.strip() for c in cells]
            continue
        if len(cells) != len(header):
            bad.append(f"{lineno} ({len(cells)} fields, expected {len(header)})")
            continue
        try:
            row = [float(c) for c in cells]
        except ValueError:
            bad.append(str(lineno))
            continue
        if not all(math.isfinite(x) for x in row):
            bad.append(str(lineno))
            continue
        rows.append(row)
    if header is None:
        raise DataError(f"{path}: empty file (a header row is required)")
    if bad:
        shown = ", ".join(bad[:20]) + (" ..." if len(bad) > 20 else "")
        raise DataError(f"{path}: non-numeric or malformed values on line(s) {shown}")
    if not rows:
        raise DataError(f"{path}: no observations")
    return Measurements(np.asarray(rows, dtype=np.float64), header, str(path), hashlib.sha256(raw).hexdigest())


def _tag(exc, label):
    """Copy of ``exc`` whose message starts with the index label."""
    msg = str(exc)
    return type(exc)(msg if msg.startswith(label.split("(")[0]) else f"{label}: {msg}")


def _seeds(config: AnalysisConfig):
    return {"bootstrap": None if config.bootstrap is None else config.bootstrap.seed,
            "monte_carlo": None if config.monte_carlo is None else config.monte_carlo.seed}


def _base_report(command, config: AnalysisConfig, data: Measurements | None):
    return IndexReport(command=command, config=config.echo(), defaults_applied=list(config.defaults_applied),
                       seeds=_seeds(config), data=None if data is None else data.info())


def _univariate_model(config: AnalysisConfig, sample):
    if sample is None and not isinstance(config.model, dict):
        raise ConfigError(f"model directive {config.model!r} needs measurements (--data) "
                          f"or a fixed model {{family, params}}")
    model, fit = resolve_model(config.model, sample, config.interpolate_quantiles)
    info = model.to_dict()
    if fit is not None:
        info.update({"ks": fit.ks, "method": fit.method})
    return model, info


def run_analysis(config: AnalysisConfig, data: Measurements | None = None) -> IndexReport:
    """Evaluate every configured univariate index, in configuration order."""
    if config.spec is None:
        raise ConfigError("analyze needs univariate limits L and U")
    sample = None if data is None else data.sample()
    report = _base_report("analyze", config, data)
    model, report.model = _univariate_model(config, sample)
    if sample is not None:
        moments = sample.moments() if sample.sd() > 0 else None
        n = sample.n
    else:
        moments = ProcessMoments.of(model)
        n = None
    ctx = IndexContext(spec=config.spec, desired=config.desired, model=model, moments=moments)

    for request in config.indices:
        label = request_label(request)
        params, _ = resolve_params(request)
        try:
            result = evaluate(request, ctx, sample_size=n)
        except (DomainError, NumericError) as exc:
            raise _tag(exc, label) from None
        interval = None
        if config.bootstrap is not None and sample is not None:
            bs = config.bootstrap
            try:
                ci = bootstrap_ci(sample, request, B=bs.B, level=bs.level, seed=bs.seed, config=config)
            except (DomainError, NumericError) as exc:
                raise _tag(exc, f"{label} bootstrap") from None
            interval = {"lower": ci.lower, "upper": ci.upper, "level": ci.level, "method": ci.method,
                        "replicates": ci.replicates, "seed": ci.seed, "point_outside": ci.point_outside}
            if ci.point_outside:
                report.warnings.append(f"{label}: point estimate lies outside its bootstrap interval")
        report.indices.append(index_entry(request.name, label, result.value, result.components,
                                          result.notes, params, interval))
    if config.bootstrap is not None and sample is None:
        report.warnings.append("bootstrap block ignored: no measurements were given")
    return report


def _generalized_entries(names, gen, suffix):
    out = []
    for name in ("c_py_M", "c_pyk_M", "c_pTk_M"):
        if name in names:
            value = getattr(gen, name)
            comps = {"p": gen.p, "p0": gen.p0, "standard_error": gen.standard_error,
                     "N_L": gen.spec.lower, "N_U": gen.spec.upper}
            notes = gen.notes if name == "c_pTk_M" else []
            out.append(index_entry(name, f"{name}[{suffix}]", value, comps, notes,
                                   {"structural": gen.structural.to_dict(), "method": gen.method}))
    return out


def run_mv_analysis(config: AnalysisConfig, data: Measurements | None = None) -> IndexReport:
    """Multivariate indices from data (five-step pipeline) or from a normal model."""
    mv = config.multivariate
    if mv is None:
        raise ConfigError("mv-analyze needs a 'multivariate' block")
    report = _base_report("mv-analyze", config, data)
    mc = config.monte_carlo
    mc_n = 1_000_000 if mc is None else mc.n
    seed = None if mc is None else mc.seed
    workers = 1 if mc is None else mc.workers
    names = [r.name for r in mv.indices]

    x = None
    if data is not None:
        if data.dim != mv.spec.dim:
            raise DataError(f"{data.path}: {data.dim} columns, the specification has {mv.spec.dim} axes")
        x = data.values
    elif mv.model is None:
        raise ConfigError("mv-analyze needs measurements (--data) or multivariate.model")

    entries = {}
    if set(names) & {"c_py_M", "c_pyk_M", "c_pTk_M"}:
        if x is not None:
            pipe = five_step_pipeline(x, list(mv.families), mv.structural, mv.spec, mv.desired, mv.significance)
            report.sections["pipeline"] = {
                "fits": [f.to_dict() for f in pipe.fits],
                "winner": None if pipe.winner is None else pipe.winner.to_dict(),
                "adequate": pipe.adequate,
                "significance": mv.significance,
            }
            report.warnings.extend(pipe.warnings)
            gen = pipe.indices
            report.model = {"family": gen.model.family, "method": gen.method,
                            "structural": gen.structural.to_dict(), "params": dict(gen.model.params)}
            for e in _generalized_entries(names, gen, gen.structural.label):
                entries.setdefault(e["name"], []).append(e)
        else:
            for N in mv.structural:
                gen = mv_generalized(mv.spec, N, mv.model, mv.desired, mc_n=mc_n, seed=seed, workers=workers)
                for e in _generalized_entries(names, gen, N.label):
                    entries.setdefault(e["name"], []).append(e)

    if "chen_mcp" in names:
        source = x if x is not None else mv.model
        res = chen_mcp(source, mv.spec, mv.p_nc, mc_n, seed, workers, details=True)
        entries["chen_mcp"] = [index_entry("chen_mcp", "chen_mcp", res.value,
                                           {"radius": res.radius, "bisection_steps": res.iterations,
                                            "draws": res.n}, [], {"p_nc": mv.p_nc})]
    if "shahriari" in names:
        if x is None:
            raise ConfigError("the shahriari vector needs measurements (--data)")
        sv = shahriari_vector(x, mv.spec, mv.p_nc, mc_n, seed, workers)
        comps = {"c1": sv.c1, "c2": sv.c2, "c3": sv.c3, "t2": sv.t2, "f_statistic": sv.f_statistic,
                 "box_scale": sv.box_scale}
        entries["shahriari"] = [index_entry("shahriari", "shahriari", None, comps, list(sv.notes),
                                            {"p_nc": mv.p_nc})]
    for request in mv.indices:
        if request.name != "volume_ratio":
            continue
        model = mv.model if mv.model is not None else MvNormal.from_data(x)
        level = float(request.params["level"])
        value = ellipsoid_volume_ratio(model, level, mv.p_nc)
        entries.setdefault("volume_ratio", []).append(
            index_entry("volume_ratio", request_label(request), value, {"dimension": model.dim},
                        [NOTE_VOLUME_EXPONENT], {"level": level, "p_nc": mv.p_nc}))

    seen = set()
    for name in names:
        if name not in seen:
            report.indices.extend(entries.get(name, []))
            seen.add(name)
    return report


def run_fit(data: Measurements, families) -> IndexReport:
    sample = data.sample()
    report = IndexReport(command="fit", config={"families": list(families)}, data=data.info())
    fits = []
    for fam in families:
        try:
            fit = fit_model(sample, fam)
        except CapqError as exc:
            fits.append({"family": fam, "ks": None, "method": None, "params": None, "error": str(exc)})
            continue
        fits.append({"family": fam, "ks": fit.ks, "method": fit.method, "params": dict(fit.model.params),
                     "error": None})
    scored = [f for f in fits if f["ks"] is not None and f["family"] != "empirical"]
    if scored:
        best = min(scored, key=lambda f: f["ks"])
        report.model = {"family": best["family"], "params": best["params"], "ks": best["ks"]}
    else:
        report.warnings.append("no parametric family could be fitted")
    report.sections["fits"] = fits
    return report


def run_oracle(config: AnalysisConfig, data: Measurements | None = None, n=None) -> IndexReport:
    """Compare the analytic yield with a seeded Monte Carlo estimate."""
    if config.spec is None:
        raise ConfigError("oracle needs univariate limits L and U")
    mc = config.monte_carlo
    if mc is None or mc.seed is None:
        raise ConfigError("oracle needs a seed (monte_carlo.seed or --seed)")
    n = mc.n if n is None else int(n)
    if n < 10_000:
        raise ConfigError(f"oracle needs n >= 10000, got {n}")
    sample = None if data is None else data.sample()
    report = _base_report("oracle", config, data)
    model, report.model = _univariate_model(config, sample)
    analytic = yield_summary(model, config.spec).p
    est = mc_yield(model, config.spec, n, mc.seed, mc.workers)
    z = 0.0 if est.standard_error == 0 else (est.estimate - analytic) / est.standard_error
    report.sections["oracle"] = {"analytic_yield": analytic, "mc_yield": est.estimate,
                                 "standard_error": est.standard_error, "n": est.n, "z": z,
                                 "agrees_within_3se": abs(z) <= 3.0 or est.estimate == analytic}
    return report


def list_indices() -> dict:
    uni = [{"name": d.name, "needs": d.needs, "citation": d.citation, "definition": d.summary,
            "defaults": dict(d.defaults)} for d in INDEX_REGISTRY.values()]
    return {"schema_version": 1, "univariate": uni, "multivariate": list(MV_INDICES)}


def _list_text(listing) -> bytes:
    lines = []
    width = max(len(d["name"]) for d in listing["univariate"])
    cw = max(len(d["citation"]) for d in listing["univariate"])
    for d in listing["univariate"]:
        lines.append(f"{d['name'].ljust(width)}  {d['needs'].ljust(7)}  {d['citation'].ljust(cw)}  "
                     f"{d['definition']}")
    lines.append("")
    lines.append("multivariate: " + ", ".join(listing["multivariate"]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parser():
    parser = argparse.ArgumentParser(prog="capq", description="Process capability analysis.")
    parser.add_argument("--version", action="version", version=f"capq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("--config", required=True, help="JSON analysis configuration")
            p.add_argument("--seed", type=int, help="override every seed in the configuration")
        p.add_argument("--data", required=not with_config, help="CSV file with one header row")
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--out", help="write the report here instead of stdout")

    common(sub.add_parser("analyze", help="univariate indices"))
    common(sub.add_parser("mv-analyze", help="multivariate indices"))
    p = sub.add_parser("fit", help="fit candidate families and rank them by KS distance")
    common(p, with_config=False)
    p.add_argument("--families", help="comma-separated family names (default: all continuous families)")
    p = sub.add_parser("oracle", help="Monte Carlo check of the analytic yield")
    common(p)
    p.add_argument("--n", type=int, help="number of draws (default from the configuration)")
    p = sub.add_parser("list-indices", help="list the available indices")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--out")
    return parser


def _emit(payload: bytes, out):
    if out:
        try:
            with open(out, "wb") as fh:
                fh.write(payload)
        except OSError as exc:
            raise DataError(f"cannot write {out}: {exc.strerror or exc}") from None
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()


def _dispatch(args) -> bytes:
    if args.command == "list-indices":
        listing = list_indices()
        return render_report(listing, "json") if args.format == "json" else _list_text(listing)

    data = load_measurements(args.data) if args.data else None
    if args.command == "fit":
        families = AUTO_FAMILIES
        if args.families:
            families = tuple(f.strip() for f in args.families.split(",") if f.strip())
            unknown = [f for f in families if f not in FAMILIES]
            if unknown:
                raise ConfigError(f"unknown families {unknown}; expected from {', '.join(FAMILIES)}")
        return render_report(run_fit(data, families), args.format)

    config = load_config(args.config, seed=args.seed)
    if args.command == "analyze":
        report = run_analysis(config, data)
    elif args.command == "mv-analyze":
        report = run_mv_analysis(config, data)
    else:
        report = run_oracle(config, data, args.n)
    return render_report(report, args.format)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _emit(_dispatch(args), getattr(args, "out", None))
    except ConfigError as exc:
        print(f"capq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"capq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, NumericError, CapqError) as exc:
        print(f"capq: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
