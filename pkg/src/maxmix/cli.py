"""Command-line entry point: ``maxmix <command> [options]``.

Every run writes ``manifest.json`` into ``--out`` with the resolved options,
the seed and the library versions. A JSON ``--config`` file supplies option
defaults; flags given on the command line take precedence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .depmeasures import flambda_madogram_empirical
from .estimate import NlsConfig, ThetaEstimates, select_a, window_average
from .io import dump_json, ingest_observations, read_field, read_sites, write_field, write_rows, write_sites
from .margins import MarginModel, fit_gev_site, to_unit_frechet
from .models import MaxMixture, spec_from_dict
from .predict import pp_curve
from .simulate import FieldSample, simulate_inverted, simulate_max_mixture, simulate_max_stable, substream
from .spatial import InvalidInput, SiteSet, bin_lags, pairwise_lags
from .study import DEFAULT_PSI, MODELS, StudyConfig, emit_theoretical_curves, run_simulation_study, theta_rows

log = logging.getLogger("maxmix")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_A_GRID = tuple(np.round(np.linspace(0, 1, 101), 2))


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).replace(",", " ").split()]


def _params(items) -> dict:
    """``key=value`` pairs; values parsed as JSON when possible."""
    if isinstance(items, dict):
        return items
    out = {}
    for it in items or []:
        if "=" not in it:
            raise InvalidInput(f"expected key=value, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _sites(args, rng_label="sites") -> SiteSet:
    if args.sites:
        return read_sites(args.sites, args.metric)
    if args.K is None:
        raise InvalidInput("give --sites or --K")
    rng = np.random.default_rng(substream(args.seed, rng_label))
    return SiteSet.uniform_square(int(args.K), float(args.L), rng)


def _bins(args, sites: SiteSet):
    pairs = pairwise_lags(sites)
    edges = args.edges
    if isinstance(edges, str):
        p = Path(edges)
        edges = json.loads(p.read_text()) if p.exists() else json.loads(edges)
    return bin_lags(pairs, width=args.width, edges=edges, nbins=args.nbins)


def _mixture(args) -> MaxMixture:
    if args.model:
        psi = _floats(args.psi) if args.psi is not None else DEFAULT_PSI[args.model]
        return MODELS[args.model](*psi)
    raise InvalidInput("no model given")


def _load_field(args) -> FieldSample:
    sites = read_sites(args.sites, args.metric)
    return read_field(args.field, sites)


def _nls(args) -> NlsConfig:
    weights = args.weights
    if isinstance(weights, str) and weights.startswith("quantile"):
        weights = ("quantile", float(weights.split(":", 1)[1]))
    return NlsConfig(lambdas=tuple(_floats(args.lambdas)), lambda_prime=float(args.lambda_prime),
                     a_grid=tuple(_floats(args.a_grid)) if args.a_grid is not None else DEFAULT_A_GRID,
                     weights=weights, margins=args.margins)


# --------------------------------------------------------------------------
# commands

def cmd_simulate(args, out: Path) -> dict:
    sites = _sites(args)
    n = int(args.n)
    if args.model:
        spec = _mixture(args)
        fld = simulate_max_mixture(spec, sites, n, args.seed)
    else:
        if not args.family:
            raise InvalidInput("give --family or --model")
        spec = spec_from_dict({"family": args.family, **_params(args.param)})
        sim = simulate_inverted if args.inverted else simulate_max_stable
        fld = sim(spec, sites, n, args.seed)
    write_sites(out / "sites.csv", sites)
    write_field(out / "field.csv", fld)
    return {"n": fld.n, "k": fld.k}


def cmd_madogram(args, out: Path) -> dict:
    lams = _floats(args.lambdas)
    rows = []
    if args.field:
        fld = _load_field(args)
        bins = _bins(args, fld.sites)
        for lam in lams:
            rows.extend(flambda_madogram_empirical(fld, lam, bins, args.margins).rows())
    if args.model:
        spec = _mixture(args)
        hmax = float(args.h_max)
        grid = np.linspace(0.0, hmax, int(args.h_points))
        emit_theoretical_curves(spec, grid, out / "theoretical.csv", lams)
    if not rows and not args.model:
        raise InvalidInput("give --field and/or --model")
    if rows:
        write_rows(out / "madogram.csv", rows, ["lambda", "h", "value", "count", "kind"])
    return {"rows": len(rows)}


def cmd_select_a(args, out: Path) -> dict:
    fld = _load_field(args)
    bins = _bins(args, fld.sites)
    res = select_a(fld, _nls(args), bins)
    write_rows(out / "dc_curve.csv", [{"a": float(a), "dc": float(d), "excluded": int(e)}
                                      for a, d, e in zip(res.a_grid, res.dc, res.excluded)])
    write_rows(out / "theta_hat.csv", theta_rows(res.estimates))
    print(f"a* = {res.a_star:.2f}" + (" (tie)" if res.tie else ""))
    return {"a_star": res.a_star, "tie": res.tie}


def _read_theta_hat(path, a: float) -> ThetaEstimates:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InvalidInput(f"{path}: empty theta table")
    avail = sorted({float(r["a"]) for r in rows})
    best = min(avail, key=lambda v: abs(v - a))
    if abs(best - a) > 1e-9:
        raise InvalidInput(f"{path}: no fit at a={a} (nearest {best})")
    sel = [r for r in rows if float(r["a"]) == best]
    col = lambda k, t=float: np.array([t(r[k]) for r in sel])
    return ThetaEstimates(best, col("h"), col("thetaX"), col("thetaY"), np.zeros(len(sel)), col("count", int))


def cmd_predict(args, out: Path) -> dict:
    fld = _load_field(args)
    ids = list(fld.sites.ids)
    for s in (args.target, args.cond):
        if s not in ids:
            raise InvalidInput(f"unknown site id {s!r}")
    t, c = ids.index(args.target), ids.index(args.cond)
    if args.a is None:
        raise InvalidInput("give --a")
    a = float(args.a)
    if args.theta_hat:
        h0 = float(fld.sites.distance_matrix()[t, c])
        tx, ty = window_average(_read_theta_hat(args.theta_hat, a), h0, float(args.half_width), args.weighting)
    else:
        if args.theta_x is None or args.theta_y is None:
            raise InvalidInput("give --theta-x and --theta-y, or --theta-hat")
        tx, ty = float(args.theta_x), float(args.theta_y)
    rows = pp_curve(fld.values[:, t], fld.values[:, c], a, tx, ty, _floats(args.q_grid))
    write_rows(out / "predict.csv", rows, ["q", "z", "empirical", "model"])
    return {"theta_x": tx, "theta_y": ty}


def cmd_study(args, out: Path) -> dict:
    model = args.model or "M1"
    kw = dict(model=model, seed=int(args.seed), margins=args.margins or "empirical",
              psi=tuple(_floats(args.psi)) if args.psi is not None else DEFAULT_PSI[model])
    for name in ("K", "N", "M", "nbins"):
        if getattr(args, name) is not None:
            kw[name] = int(getattr(args, name))
    if args.L is not None:
        kw["L"] = float(args.L)
    if args.a_grid is not None:
        kw["a_grid"] = tuple(_floats(args.a_grid))
    cfg = StudyConfig(**kw)
    rep = run_simulation_study(cfg, out, workers=int(args.threads))
    print(f"correct selection frequency: {rep.frequency_correct():.2f}")
    return {"selection": rep.selection}


def cmd_ingest(args, out: Path) -> dict:
    raw = ingest_observations(args.sites, args.data, args.metric, args.season)
    cols, margins = [], []
    for j, sid in enumerate(raw.sites.ids):
        series = raw.values[:, j]
        if args.margins == "gev":
            fit = fit_gev_site(series)
            model = MarginModel(fit.model)
            margins.append({"id": sid, "model": "gev", "mu": fit.model.mu, "sigma": fit.model.sigma,
                            "xi": fit.model.xi, "n": fit.n})
        else:
            model = MarginModel()
            margins.append({"id": sid, "model": "empirical", "mu": "", "sigma": "", "xi": "",
                            "n": int(np.sum(~np.isnan(series)))})
        cols.append(to_unit_frechet(series, model))
    fld = FieldSample(np.column_stack(cols), "unit-frechet", raw.sites, args.seed,
                      {"source": str(args.data), "season": bool(args.season), "margin_model": args.margins})
    write_sites(out / "sites.csv", raw.sites)
    write_field(out / "field.csv", fld)
    write_rows(out / "margins.csv", margins, ["id", "model", "mu", "sigma", "xi", "n"])
    return {"n": fld.n, "k": fld.k}


COMMANDS = {"simulate": cmd_simulate, "madogram": cmd_madogram, "select-a": cmd_select_a,
            "predict": cmd_predict, "study": cmd_study, "ingest": cmd_ingest}


# --------------------------------------------------------------------------
# parser

def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes (study only)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("-v", "--verbose", action="store_true")


def _site_opts(p, field=True):
    p.add_argument("--sites", help="sites CSV (id,c1,c2[,alt])")
    p.add_argument("--metric", default="euclidean", choices=["euclidean", "great-circle-km"])
    if field:
        p.add_argument("--field", help="field CSV (replicate or date column, then one column per site)")


def _bin_opts(p):
    p.add_argument("--width", type=float, help="lag bin width")
    p.add_argument("--edges", help="bin edges as a JSON array or a file holding one")
    p.add_argument("--nbins", type=int, default=15)


def _model_opts(p):
    p.add_argument("--model", choices=sorted(MODELS))
    p.add_argument("--psi", help="model parameters, 5 numbers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("simulate", help="simulate a max-stable, inverted or max-mixture field")
    _common(p)
    _site_opts(p, field=False)
    _model_opts(p)
    p.add_argument("--family", choices=["smith", "teg", "brown-resnick", "extremal-t"])
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="family parameter (repeatable)")
    p.add_argument("--inverted", action="store_true", help="invert the max-stable field")
    p.add_argument("--K", type=int, help="number of uniform sites when no --sites")
    p.add_argument("--L", type=float, default=2.0, help="side of the square domain")
    p.add_argument("--n", type=int, default=2000, help="replications")

    p = sub.add_parser("madogram", help="empirical and theoretical F^lambda-madograms")
    _common(p)
    _site_opts(p)
    _bin_opts(p)
    _model_opts(p)
    p.add_argument("--lambdas", default="0.5 1 1.5 3")
    p.add_argument("--margins", choices=["empirical", "unit-frechet", "uniform"])
    p.add_argument("--h-max", type=float, default=2.0, dest="h_max")
    p.add_argument("--h-points", type=int, default=201, dest="h_points")

    p = sub.add_parser("select-a", help="fit theta curves and minimize DC(a)")
    _common(p)
    _site_opts(p)
    _bin_opts(p)
    p.add_argument("--a-grid", dest="a_grid", help="candidate a values (default 0, 0.01, ..., 1)")
    p.add_argument("--lambdas", default="1 3", help="fitting lambdas")
    p.add_argument("--lambda-prime", dest="lambda_prime", type=float, default=1.5)
    p.add_argument("--weights", default="equal", help="'equal' or 'quantile:q'")
    p.add_argument("--margins", choices=["empirical", "unit-frechet", "uniform"])

    p = sub.add_parser("predict", help="conditional exceedance P-P table for a site pair")
    _common(p)
    _site_opts(p)
    p.add_argument("--target", required=False)
    p.add_argument("--cond", required=False)
    p.add_argument("--a", type=float)
    p.add_argument("--theta-x", dest="theta_x", type=float)
    p.add_argument("--theta-y", dest="theta_y", type=float)
    p.add_argument("--theta-hat", dest="theta_hat", help="theta_hat.csv from select-a")
    p.add_argument("--half-width", dest="half_width", type=float, default=10.0)
    p.add_argument("--weighting", choices=["pairs", "plain"], default="pairs")
    p.add_argument("--q-grid", dest="q_grid", default="0.9 0.92 0.94 0.96 0.98 0.99")

    p = sub.add_parser("study", help="Monte-Carlo study on model M1 or M2")
    _common(p)
    _model_opts(p)
    for name, typ in (("K", int), ("N", int), ("M", int), ("L", float), ("nbins", int)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--a-grid", dest="a_grid")
    p.add_argument("--margins", choices=["empirical", "unit-frechet"])

    p = sub.add_parser("ingest", help="read raw observations and move them to unit Frechet margins")
    _common(p)
    _site_opts(p, field=False)
    p.add_argument("--data", help="wide data CSV (date column, then one column per site)")
    p.add_argument("--season", action="store_true", help="keep April to September only")
    p.add_argument("--margins", choices=["gev", "empirical"], default="empirical")
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InvalidInput("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        bad = sorted(set(cfg) - known)
        if bad:
            raise InvalidInput(f"unknown config key(s): {', '.join(bad)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def manifest(args, result: dict) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    return {
        "command": args.command,
        "options": opts,
        "seed": args.seed,
        "result": result,
        "versions": {"maxmix": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except InvalidInput as exc:
        print(f"maxmix: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](args, out)
    except (ValueError, OSError, KeyError) as exc:
        print(f"maxmix: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"maxmix: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    dump_json(out / "manifest.json", manifest(args, result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
