"""Monte-Carlo study of the theta fit and of the DC(a) selection on M1/M2 max-mixtures."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .depmeasures import flambda_mm_theoretical
from .estimate import STUDY_A_GRID, NlsConfig, empirical_curves, nls_fit_theta, select_a
from .io import dump_json, write_rows
from .models import TEG, MaxMixture, model_m1, model_m2
from .simulate import simulate_max_mixture, substream
from .spatial import InvalidInput, SiteSet, bin_lags, pairwise_lags

log = logging.getLogger(__name__)

MODELS = {"M1": model_m1, "M2": model_m2}
DEFAULT_PSI = {"M1": (0.2, 0.1, 0.5, 0.9, 0.7), "M2": (0.1, 2.0, 0.5, 2.0, 1.5)}
PLOT_LAMBDAS = (0.5, 1.0, 1.5, 3.0)


@dataclass(frozen=True)
class StudyConfig:
    """Design of one simulation study.

    ``psi`` is (r_X, phi_X, a, r_Y, phi_Y) for M1 and (phi_X, tau, a, v,
    phi_Y) for M2. Sites are uniform on ``[0, L]^2``.
    """

    model: str = "M1"
    psi: tuple = (0.2, 0.1, 0.5, 0.9, 0.7)
    K: int = 50
    L: float = 2.0
    N: int = 2000
    M: int = 20
    a_grid: tuple = STUDY_A_GRID
    seed: int = 0
    nbins: int = 15
    margins: str = "empirical"
    lambdas: tuple = (1.0, 3.0)
    lambda_prime: float = 1.5

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"model must be one of {sorted(MODELS)}")
        object.__setattr__(self, "psi", tuple(float(p) for p in self.psi))
        object.__setattr__(self, "a_grid", tuple(float(a) for a in self.a_grid))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if len(self.psi) != 5:
            raise InvalidInput("psi needs 5 entries")
        for name in ("K", "N", "M", "nbins"):
            if int(getattr(self, name)) < 1:
                raise InvalidInput(f"{name} must be positive")
        if self.K < 2:
            raise InvalidInput("K must be at least 2")
        if not self.L > 0:
            raise InvalidInput("L must be positive")
        if self.margins not in ("empirical", "unit-frechet"):
            raise InvalidInput("margins must be 'empirical' or 'unit-frechet'")
        self.spec()  # validates psi against the model
        self.nls()

    @property
    def a0(self) -> float:
        return self.psi[2]

    def spec(self) -> MaxMixture:
        return MODELS[self.model](*self.psi)

    def nls(self) -> NlsConfig:
        return NlsConfig(lambdas=self.lambdas, lambda_prime=self.lambda_prime, a_grid=self.a_grid,
                         margins=None if self.margins == "unit-frechet" else "empirical")

    def edges(self) -> np.ndarray:
        """Common bin edges over [0, L sqrt 2] so bins line up across experiments."""
        return np.linspace(0.0, self.L * math.sqrt(2), self.nbins + 1)


@dataclass
class ExperimentResult:
    index: int
    a_grid: np.ndarray
    dc: np.ndarray
    excluded: np.ndarray
    a_star: float
    bin_index: np.ndarray      # positions of the non-empty bins among the common edges
    h: np.ndarray
    count: np.ndarray
    theta_x: np.ndarray        # fitted at the true a
    theta_y: np.ndarray
    true_x: np.ndarray
    true_y: np.ndarray
    fits: list = field(default_factory=list)


def run_experiment(config: StudyConfig, m: int) -> ExperimentResult:
    """Experiment m: fresh site layout and field from the m-th substreams of the master seed."""
    rng = np.random.default_rng(substream(config.seed, "sites", m))
    sites = SiteSet.uniform_square(config.K, config.L, rng)
    spec = config.spec()
    fld = simulate_max_mixture(spec, sites, config.N, substream(config.seed, "field", m))
    edges = config.edges()
    bins = bin_lags(pairwise_lags(sites), edges=edges)
    nls = config.nls()
    res = select_a(fld, nls, bins)
    a0 = config.a0
    hit = np.flatnonzero(np.isclose(res.a_grid, a0))
    if len(hit):
        est = res.estimates[hit[0]]
    else:
        est = nls_fit_theta(None, a0, nls, curves=empirical_curves(fld, bins, nls.lambdas, nls.margins))
    bidx = np.searchsorted(edges, bins.lags, side="left") - 1
    return ExperimentResult(
        m, res.a_grid, res.dc, res.excluded, res.a_star, bidx, est.h, est.count,
        est.theta_x, est.theta_y, np.asarray(spec.theta_x(est.h), float), np.asarray(spec.theta_y(est.h), float),
        res.estimates,
    )


def _spread(results, attr, nbins):
    """Stack per-experiment bin values onto the common bins (NaN where a bin is empty)."""
    out = np.full((len(results), nbins), np.nan)
    for r, res in enumerate(results):
        out[r, res.bin_index] = getattr(res, attr)
    return out


@dataclass
class StudyReport:
    config: StudyConfig
    experiments: list
    selection: dict
    dc_box: list
    mse: list

    @property
    def a_star(self) -> np.ndarray:
        return np.array([e.a_star for e in self.experiments])

    def frequency_correct(self) -> float:
        return float(np.mean(np.isclose(self.a_star, self.config.a0)))


def aggregate(config: StudyConfig, results: list) -> StudyReport:
    """Combine experiments in index order, so the output does not depend on scheduling."""
    results = sorted(results, key=lambda r: r.index)
    nb = config.nbins
    grid = np.array(sorted(config.a_grid))
    dc = np.array([r.dc for r in results])
    box = []
    for k, a in enumerate(grid):
        q = np.nanquantile(dc[:, k], [0.0, 0.25, 0.5, 0.75, 1.0])
        box.append({"a": float(a), "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]})
    a_star = np.array([r.a_star for r in results])
    selection = {float(a): float(np.mean(np.isclose(a_star, a))) for a in grid}
    mse = []
    with np.errstate(invalid="ignore"):
        tx, ty = _spread(results, "theta_x", nb), _spread(results, "theta_y", nb)
        gx, gy = _spread(results, "true_x", nb), _spread(results, "true_y", nb)
        hh = _spread(results, "h", nb)
        ex = (tx - gx) ** 2 / gx
        ey = (ty - gy) ** 2 / gy
        for b in range(nb):
            n = int(np.sum(~np.isnan(ex[:, b])))
            if n == 0:
                continue
            mse.append({"bin": b + 1, "h": float(np.nanmean(hh[:, b])), "n_experiments": n,
                        "mse_rel_x": float(np.nanmean(ex[:, b])), "mse_rel_y": float(np.nanmean(ey[:, b]))})
    return StudyReport(config, results, selection, box, mse)


def _write_experiment(out: Path, r: ExperimentResult) -> None:
    d = out / f"experiment_{r.index + 1:03d}"
    d.mkdir(parents=True, exist_ok=True)
    write_rows(d / "dc_curve.csv", [{"a": float(a), "dc": float(v), "excluded": int(e)}
                                    for a, v, e in zip(r.a_grid, r.dc, r.excluded)])
    write_rows(d / "theta_hat.csv", theta_rows(r.fits))


def theta_rows(estimates) -> list[dict]:
    rows = []
    for est in estimates:
        for k in range(len(est.h)):
            rows.append({"a": float(est.a), "h": float(est.h[k]), "thetaX": float(est.theta_x[k]),
                         "thetaY": float(est.theta_y[k]), "count": int(est.count[k]),
                         "boundary_x": bool(est.boundary_x[k]), "boundary_y": bool(est.boundary_y[k])})
    return rows


def run_simulation_study(config: StudyConfig, out_dir=None, workers: int = 1) -> StudyReport:
    """Run M experiments and optionally write per-experiment and aggregate CSVs.

    Experiments may run in worker processes; all files are written here in
    experiment order as results arrive.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r in pool.map(run_experiment, [config] * config.M, range(config.M)):
                results.append(r)
                if out is not None:
                    _write_experiment(out, r)
    else:
        for m in range(config.M):
            r = run_experiment(config, m)
            log.info("experiment %d: a* = %.2f", m + 1, r.a_star)
            results.append(r)
            if out is not None:
                _write_experiment(out, r)
    report = aggregate(config, results)
    if out is not None:
        write_rows(out / "mse_rel.csv", report.mse)
        write_rows(out / "dc_boxplot.csv", report.dc_box)
        write_rows(out / "selection.csv", [{"a": a, "frequency": f} for a, f in report.selection.items()])
        write_rows(out / "a_star.csv", [{"experiment": r.index + 1, "a_star": r.a_star} for r in report.experiments])
        dump_json(out / "study_config.json", asdict(config))
    return report


def theoretical_curves(spec: MaxMixture, h_grid, lambdas=PLOT_LAMBDAS) -> list[dict]:
    """Tabulate the max-mixture F^lambda-madogram over ``h_grid``.

    TEG components contribute their disk diameter 2r to the grid; rows at
    those lags carry a ``marker`` (``diameter_X`` or ``diameter_Y``).
    """
    h = np.asarray(h_grid, dtype=float)
    if np.any(h < 0):
        raise InvalidInput("lags must be nonnegative")
    marks = {}
    for tag, part in (("diameter_X", spec.x_spec), ("diameter_Y", spec.y_spec)):
        if isinstance(part, TEG):
            marks[2 * part.radius] = (marks.get(2 * part.radius, "") + ";" + tag).lstrip(";")
    h = np.unique(np.concatenate([h, list(marks)]))
    tx = np.asarray(spec.theta_x(h), float)
    ty = np.asarray(spec.theta_y(h), float)
    rows = []
    for lam in lambdas:
        nu = flambda_mm_theoretical(spec.a, lam, tx, ty)
        for k in range(len(h)):
            rows.append({"lambda": float(lam), "h": float(h[k]), "thetaX": float(tx[k]), "thetaY": float(ty[k]),
                         "value": float(nu[k]), "marker": marks.get(float(h[k]), "")})
    return rows


def emit_theoretical_curves(spec: MaxMixture, h_grid, path, lambdas=PLOT_LAMBDAS) -> list[dict]:
    rows = theoretical_curves(spec, h_grid, lambdas)
    write_rows(path, rows)
    return rows


def with_overrides(config: StudyConfig, **kw) -> StudyConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
