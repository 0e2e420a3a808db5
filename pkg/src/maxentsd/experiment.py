"""Monte Carlo harness for the sample dependence of maximum entropy fits.

For every sample size ``N`` and replicate ``r`` the harness draws a sample
from a known law, estimates the moments, refits, and compares the refit with
the reference density ``f*`` fitted to the exact moments. Replicate ``r`` at
the ``j``-th sample size uses the seed ``seed + r * 10**6 + j``.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy import stats

from .basis import MomentBasis, eval_basis
from .divergence import GridDensity, kl_divergence
from .exceptions import ConfigurationError, InputError, MaxentError
from .quadrature import DEFAULT_QUAD_POINTS, FINITE, HALF_LINE, SupportSpec, build_rule
from .sensitivity import (
    DEFAULT_Z,
    abs_matrix,
    chebyshev_tail,
    clt_sigma2_g,
    clt_sigma2_x,
    corollary_band,
    functional_moments,
    jacobian_D,
    make_functional,
)
from .solver import MaxentModel, SolverOptions, fit

logger = logging.getLogger(__name__)

SEED_STRIDE = 10**6
MIN_ACCEPTANCE = 1e-3
KS_COEFF = 1.63

UNIFORM = "uniform"
TRUNC_EXP = "truncated_exponential"
UNIT_EXP = "unit_exponential"
TABULATED = "grid_tabulated"


class EnvelopeError(ConfigurationError):
    """Rejection sampling would accept too rarely to be practical."""


@dataclass(frozen=True, eq=False)
class TrueDensity:
    """The law generating the samples (density with respect to ``dx``)."""

    kind: str
    support: SupportSpec
    rate: float = 1.0
    table_x: np.ndarray | None = None
    table_f: np.ndarray | None = None

    def __post_init__(self):
        s = self.support
        if self.kind in (UNIFORM, TRUNC_EXP) and s.kind != FINITE:
            raise ConfigurationError(f"{self.kind} needs a finite_interval support")
        if self.kind == TRUNC_EXP and not (math.isfinite(self.rate) and self.rate != 0):
            raise ConfigurationError("truncated_exponential needs a finite non-zero rate")
        if self.kind == UNIT_EXP and s.kind != HALF_LINE:
            raise ConfigurationError("unit_exponential needs a half_line support")
        if self.kind == TABULATED:
            tx = np.asarray(self.table_x, dtype=float)
            tf = np.asarray(self.table_f, dtype=float)
            if tx.ndim != 1 or tx.size < 2 or tx.shape != tf.shape or np.any(np.diff(tx) <= 0):
                raise ConfigurationError("grid_tabulated needs increasing table_x and matching table_f")
            if np.any(tf < 0) or not np.all(np.isfinite(tf)) or not np.all(s.contains(tx)):
                raise ConfigurationError("grid_tabulated values must be finite, >= 0 and inside the support")
            mass = float(np.sum(np.diff(tx) * 0.5 * (tf[1:] + tf[:-1])))
            if not mass > 0:
                raise ConfigurationError("grid_tabulated density has zero mass")
            object.__setattr__(self, "table_x", tx)
            object.__setattr__(self, "table_f", tf / mass)
        elif self.kind not in (UNIFORM, TRUNC_EXP, UNIT_EXP):
            raise ConfigurationError(f"unknown true density kind {self.kind!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "TrueDensity":
        support = SupportSpec.from_dict(doc.get("support", {}))
        return cls(
            doc.get("kind"),
            support,
            float(doc.get("rate", 1.0)),
            doc.get("table_x"),
            doc.get("table_f"),
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "support": self.support.to_dict()}
        if self.kind == TRUNC_EXP:
            out["rate"] = self.rate
        if self.kind == TABULATED:
            out["table_x"] = self.table_x.tolist()
            out["table_f"] = self.table_f.tolist()
        return out

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = self.support
        inside = s.contains(x)
        if self.kind == UNIFORM:
            out = np.full(x.shape, 1.0 / (s.b - s.a))
        elif self.kind == TRUNC_EXP:
            r, L = self.rate, s.b - s.a
            out = r * np.exp(-r * (x - s.a)) / -np.expm1(-r * L)
        elif self.kind == UNIT_EXP:
            out = np.exp(-(x - s.a))
        else:
            out = np.interp(x, self.table_x, self.table_f, left=0.0, right=0.0)
        return np.where(inside, out, 0.0)

    def _nodes(self):
        """High-accuracy quadrature nodes and weights for ``integral . pdf dx``."""
        s = self.support
        if self.kind == UNIT_EXP:
            t, w = laggauss(150)
            return s.a + t, w
        if self.kind == TABULATED:
            t, w = leggauss(8)
            t = 0.5 * (t + 1.0)
            lo, hi = self.table_x[:-1], self.table_x[1:]
            x = (lo[:, None] + (hi - lo)[:, None] * t).ravel()
            ww = ((hi - lo)[:, None] * 0.5 * w).ravel()
            return x, ww * self.pdf(x)
        t, w = leggauss(512)
        x = s.a + 0.5 * (s.b - s.a) * (t + 1.0)
        return x, 0.5 * (s.b - s.a) * w * self.pdf(x)

    def expect(self, fn):
        """``E[fn(X)]``; ``fn`` is vectorized and may return an ``(n, ...)`` array."""
        x, w = self._nodes()
        return np.tensordot(w, np.asarray(fn(x), dtype=float), axes=(0, 0))

    def moments(self, basis: MomentBasis) -> np.ndarray:
        return self.expect(lambda x: eval_basis(basis, x))

    def covariance(self, basis: MomentBasis) -> np.ndarray:
        """Population covariance ``Sigma(h)`` of ``h(X)``."""
        mu = self.moments(basis)
        second = self.expect(lambda x: np.einsum("ni,nj->nij", eval_basis(basis, x), eval_basis(basis, x)))
        cov = second - np.outer(mu, mu)
        return 0.5 * (cov + cov.T)

    def sample(self, N: int, rng: np.random.Generator) -> np.ndarray:
        s = self.support
        if self.kind == TABULATED:
            return self._rejection(N, rng)
        u = rng.random(N)
        if self.kind == UNIFORM:
            return s.a + (s.b - s.a) * u
        if self.kind == TRUNC_EXP:
            r, L = self.rate, s.b - s.a
            return np.minimum(s.a - np.log1p(u * np.expm1(-r * L)) / r, s.b)
        return s.a - np.log1p(-u)

    def _rejection(self, N, rng):
        lo, hi = self.table_x[0], self.table_x[-1]
        fmax = float(self.table_f.max())
        acceptance = 1.0 / (fmax * (hi - lo))
        if acceptance < MIN_ACCEPTANCE:
            raise EnvelopeError(f"rejection acceptance rate {acceptance:.2e} is below {MIN_ACCEPTANCE:g}")
        out = np.empty(0)
        while out.size < N:
            batch = int(1.2 * (N - out.size) / acceptance) + 16
            x = lo + (hi - lo) * rng.random(batch)
            keep = rng.random(batch) * fmax <= self.pdf(x)
            out = np.concatenate([out, x[keep]])
        return out[:N]


def draw_sample(density: TrueDensity, N: int, seed: int):
    """``N`` i.i.d. draws, reproducible from ``seed``."""
    from .basis import SampleSet

    if N < 1:
        raise InputError("N must be at least 1")
    return SampleSet(density.sample(int(N), np.random.default_rng(seed)), density.support, seed)


@dataclass(frozen=True)
class FunctionalSpec:
    """A test function ``g`` and the tolerance ``a`` for its coverage check."""

    g: object
    a: float
    label: str

    @classmethod
    def from_dict(cls, doc: dict) -> "FunctionalSpec":
        g = make_functional(doc["g"])
        a = float(doc["a"])
        if not a > 0:
            raise ConfigurationError("functional tolerance a must be positive")
        label = doc.get("label") or "{kind}".format(**doc["g"]) + "".join(
            f"_{k}={v}" for k, v in doc["g"].items() if k != "kind"
        )
        return cls(g, a, label)

    def to_dict(self) -> dict:
        return {"g": self.g.to_dict(), "a": self.a, "label": self.label}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    true_density: TrueDensity
    basis: MomentBasis
    N_grid: tuple
    replicates: int
    seed: int = 0
    grid_points: tuple = ()
    solver: SolverOptions = field(default_factory=SolverOptions)
    support: SupportSpec | None = None
    quad_points: int = DEFAULT_QUAD_POINTS
    functionals: tuple = ()
    chebyshev_a: tuple = ()
    clt_z: float = DEFAULT_Z
    workers: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.N_grid)
        if not grid or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("N_grid must be a strictly increasing list of positive integers")
        if int(self.replicates) < 1:
            raise ConfigurationError("replicates must be at least 1")
        object.__setattr__(self, "N_grid", grid)
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "grid_points", tuple(float(x) for x in self.grid_points))
        object.__setattr__(self, "chebyshev_a", tuple(float(a) for a in self.chebyshev_a))
        if any(a <= 0 for a in self.chebyshev_a):
            raise ConfigurationError("chebyshev_a values must be positive")
        if self.support is None:
            object.__setattr__(self, "support", self.true_density.support)
        pts = np.asarray(self.grid_points)
        if pts.size and not np.all(self.support.contains(pts)):
            raise ConfigurationError("grid_points must lie inside the support")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        td = TrueDensity.from_dict(doc["true_density"])
        support = SupportSpec.from_dict(doc["support"]) if "support" in doc else None
        bounds = doc.get("bounds", {})
        return cls(
            true_density=td,
            basis=MomentBasis.from_dict(doc["basis"]),
            N_grid=tuple(doc["N_grid"]),
            replicates=doc["replicates"],
            seed=int(doc.get("seed", 0)),
            grid_points=tuple(doc.get("grid_points", ())),
            solver=SolverOptions.from_dict(doc.get("solver")),
            support=support,
            quad_points=int(doc.get("quad_points", DEFAULT_QUAD_POINTS)),
            functionals=tuple(FunctionalSpec.from_dict(f) for f in bounds.get("functionals", ())),
            chebyshev_a=tuple(bounds.get("chebyshev_a", ())),
            clt_z=float(doc.get("clt_z", DEFAULT_Z)),
            workers=int(doc.get("workers", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "true_density": self.true_density.to_dict(),
            "basis": self.basis.to_dict(),
            "support": self.support.to_dict(),
            "N_grid": list(self.N_grid),
            "replicates": self.replicates,
            "seed": self.seed,
            "grid_points": list(self.grid_points),
            "quad_points": self.quad_points,
            "bounds": {
                "chebyshev_a": list(self.chebyshev_a),
                "functionals": [f.to_dict() for f in self.functionals],
            },
            "clt_z": self.clt_z,
        }

    def cell_seed(self, replicate: int, n_index: int) -> int:
        return self.seed + replicate * SEED_STRIDE + n_index


@dataclass(eq=False)
class CellBlock:
    """Per-replicate records for one sample size."""

    N: int
    d_hat: np.ndarray
    lam_hat: np.ndarray
    l1: np.ndarray
    kl: np.ndarray
    sup: np.ndarray
    chan1_resid: np.ndarray
    f_hat: np.ndarray
    f_pred: np.ndarray
    functionals: np.ndarray
    status: list

    @property
    def ok(self) -> np.ndarray:
        return np.array([s == "ok" for s in self.status], dtype=bool)


@dataclass(frozen=True, eq=False)
class Reference:
    model: MaxentModel
    D: np.ndarray
    sigma_h: np.ndarray
    f_grid: np.ndarray
    sigma2_grid: np.ndarray
    functional_values: np.ndarray


def build_reference(config: ExperimentConfig) -> Reference:
    """Fit ``f*`` to the exact moments of the true density."""
    td, basis = config.true_density, config.basis
    d = td.moments(basis)
    rule = build_rule(config.support, config.quad_points)
    try:
        model = fit(d, basis, config.support, config.solver, rule=rule)
        D = jacobian_D(model)
    except MaxentError as exc:
        raise type(exc)(f"reference fit failed for exact moments {d.tolist()}: {exc}") from exc
    sigma_h = td.covariance(basis)
    x = np.asarray(config.grid_points)
    fvals = np.array([functional_moments(model, f.g)[0] for f in config.functionals])
    return Reference(model, D, sigma_h, model.density(x), clt_sigma2_x(model, D, sigma_h, x), fvals)


def _simulate_block(config: ExperimentConfig, ref: Reference, n_index: int, r_start: int, r_stop: int) -> CellBlock:
    N = config.N_grid[n_index]
    M = config.basis.M
    R = r_stop - r_start
    G = len(config.grid_points)
    F = len(config.functionals)
    star = ref.model
    rule = star.rule
    f_star_nodes = star.node_values()
    star_grid = GridDensity(rule, f_star_nodes)
    H_nodes = star.problem.H
    x_grid = np.asarray(config.grid_points)
    h_grid = eval_basis(config.basis, x_grid) if G else np.zeros((0, M))

    out = CellBlock(
        N,
        np.full((R, M), np.nan),
        np.full((R, M), np.nan),
        np.full(R, np.nan),
        np.full(R, np.nan),
        np.full(R, np.nan),
        np.full(R, np.nan),
        np.full((R, G), np.nan),
        np.full((R, G), np.nan),
        np.full((R, F), np.nan),
        [],
    )
    for i, r in enumerate(range(r_start, r_stop)):
        rng = np.random.default_rng(config.cell_seed(r, n_index))
        x = config.true_density.sample(N, rng)
        d_hat = eval_basis(config.basis, x).mean(axis=0)
        out.d_hat[i] = d_hat
        delta = d_hat - star.d
        shift = delta @ ref.D
        out.f_pred[i] = -ref.f_grid * ((h_grid - star.d) @ shift)
        try:
            model = fit(d_hat, config.basis, config.support, config.solver, rule=rule)
        except MaxentError as exc:
            out.status.append(type(exc).__name__)
            continue
        out.status.append("ok")
        out.lam_hat[i] = model.lam
        f_hat = model.node_values()
        diff = f_hat - f_star_nodes
        l1 = float(rule.weights @ np.abs(diff))
        pred = -f_star_nodes * ((H_nodes - star.d) @ shift)
        out.l1[i] = l1
        out.kl[i] = kl_divergence(GridDensity(rule, f_hat), star_grid)
        out.sup[i] = float(np.max(np.abs(diff)))
        out.chan1_resid[i] = float(rule.weights @ np.abs(diff - pred)) / l1 if l1 > 0 else 0.0
        if G:
            out.f_hat[i] = model.density(x_grid)
        for k, spec in enumerate(config.functionals):
            out.functionals[i, k] = functional_moments(model, spec.g)[0]
    return out


def _merge(blocks):
    first = blocks[0]
    return CellBlock(
        first.N,
        *[np.concatenate([getattr(b, name) for b in blocks]) for name in
          ("d_hat", "lam_hat", "l1", "kl", "sup", "chan1_resid", "f_hat", "f_pred", "functionals")],
        [s for b in blocks for s in b.status],
    )


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    reference: Reference
    cells: list
    aggregate: dict = field(default_factory=dict)

    def cell(self, N: int) -> CellBlock:
        for c in self.cells:
            if c.N == N:
                return c
        raise KeyError(N)


def run_replicates(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run every ``(N, replicate)`` cell and aggregate.

    Failed refits are recorded with the exception class name, excluded from
    the aggregates, and counted. With ``workers > 1`` replicate blocks run in
    a process pool; results are merged in ``(N, replicate)`` order, so the
    output does not depend on the worker count.
    """
    ref = build_reference(config)
    workers = config.workers if workers is None else workers
    R = config.replicates
    cells = []
    if workers > 1:
        chunk = max(1, math.ceil(R / (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for j in range(len(config.N_grid)):
                futures = [
                    pool.submit(_simulate_block, config, ref, j, r0, min(R, r0 + chunk))
                    for r0 in range(0, R, chunk)
                ]
                cells.append(_merge([f.result() for f in futures]))
    else:
        for j in range(len(config.N_grid)):
            cells.append(_simulate_block(config, ref, j, 0, R))
    result = ExperimentResult(config, ref, cells)
    result.aggregate = aggregate(result)
    return result


def _summary(values: np.ndarray) -> dict:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return {"mean": None, "q05": None, "median": None, "q95": None}
    q05, q50, q95 = np.quantile(v, [0.05, 0.5, 0.95])
    return {"mean": float(v.mean()), "q05": float(q05), "median": float(q50), "q95": float(q95)}


def loglog_slope(N, values) -> float | None:
    """Least-squares slope of ``log(values)`` against ``log(N)``."""
    N = np.asarray(N, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v) & (v > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(N[keep]), np.log(v[keep]), 1)[0])


def ks_normality(scaled: np.ndarray, sigma2: float) -> dict:
    """KS test of ``scaled / sigma`` against N(0, 1) at the 1% level."""
    R = int(np.isfinite(scaled).sum())
    crit = KS_COEFF / math.sqrt(R) if R else None
    if not sigma2 > 0 or R == 0:
        return {"statistic": None, "critical": crit, "pass": None, "skipped": True}
    z = scaled[np.isfinite(scaled)] / math.sqrt(sigma2)
    stat = float(stats.kstest(z, "norm").statistic)
    return {"statistic": stat, "critical": crit, "pass": bool(stat < crit), "skipped": False}


def _cell_aggregate(config, ref, cell) -> dict:
    N = cell.N
    ok = cell.ok
    n_ok = int(ok.sum())
    star = ref.model
    out = {
        "N": N,
        "replicates": len(cell.status),
        "ok": n_ok,
        "failed": len(cell.status) - n_ok,
        "failure_rate": (len(cell.status) - n_ok) / len(cell.status),
        "failure_causes": dict(sorted(Counter(s for s in cell.status if s != "ok").items())),
        "l1_err": _summary(cell.l1),
        "kl": _summary(cell.kl),
        "sup_err": _summary(cell.sup),
        "chan1_resid": _summary(cell.chan1_resid),
        "max_abs_d_err": _summary(np.max(np.abs(cell.d_hat - star.d), axis=1)),
        "lambda_err": _summary(np.linalg.norm(cell.lam_hat - star.lam, axis=1)),
    }
    points = []
    for g, x in enumerate(config.grid_points):
        fh = cell.f_hat[ok, g]
        dev = fh - ref.f_grid[g]
        scaled = math.sqrt(N) * dev
        s2 = float(ref.sigma2_grid[g])
        half = config.clt_z * math.sqrt(s2 / N)
        entry = {
            "x": x,
            "f_star": float(ref.f_grid[g]),
            "sigma2": s2,
            "empirical_var": float(np.var(scaled, ddof=1)) if n_ok > 1 else None,
            "bias": float(dev.mean()) if n_ok else None,
            "bias_cv": float((dev - cell.f_pred[ok, g]).mean()) if n_ok else None,
            "sd": float(np.std(fh, ddof=1)) if n_ok > 1 else None,
            "band_coverage": float(np.mean(np.abs(dev) <= half)) if n_ok and s2 > 0 else None,
            "normality": ks_normality(scaled, s2),
        }
        points.append(entry)
    out["points"] = points
    return out


def aggregate(result: ExperimentResult) -> dict:
    """Summary statistics per ``N`` plus convergence slopes across ``N``."""
    config, ref = result.config, result.reference
    per_n = [_cell_aggregate(config, ref, c) for c in result.cells]
    Ns = list(config.N_grid)
    slopes = {
        "l1_median": loglog_slope(Ns, [a["l1_err"]["median"] or np.nan for a in per_n]),
        "kl_median": loglog_slope(Ns, [a["kl"]["median"] or np.nan for a in per_n]),
        "sup_median": loglog_slope(Ns, [a["sup_err"]["median"] or np.nan for a in per_n]),
        "bias_cv": [
            loglog_slope(Ns, [abs(a["points"][g]["bias_cv"] or np.nan) for a in per_n])
            for g in range(len(config.grid_points))
        ],
        "sd": [
            loglog_slope(Ns, [a["points"][g]["sd"] or np.nan for a in per_n])
            for g in range(len(config.grid_points))
        ],
    }
    out = {
        "reference": {
            "d": ref.model.d.tolist(),
            "lambda": ref.model.lam.tolist(),
            "log_z": ref.model.log_z,
            "D": ref.D.tolist(),
            "sigma_h": ref.sigma_h.tolist(),
        },
        "per_N": per_n,
        "slopes": slopes,
    }
    if len(result.cells) >= 2:
        first, last = result.cells[0], result.cells[-1]
        e0 = np.max(np.abs(first.d_hat - ref.model.d), axis=1)
        e1 = np.max(np.abs(last.d_hat - ref.model.d), axis=1)
        out["consistency_fraction"] = float(np.mean(e1 < e0))
    return out


def clt_normality_check(result: ExperimentResult, x: float, N: int | None = None) -> dict:
    """KS check of ``sqrt(N) (f_hat(x) - f*(x)) / sigma(x)`` against N(0, 1).

    ``x`` must be one of the configured grid points; ``N`` defaults to the
    largest sample size. Points with ``sigma(x) = 0`` are reported as skipped.
    """
    config = result.config
    try:
        g = config.grid_points.index(float(x))
    except ValueError:
        raise InputError(f"x={x!r} is not one of the configured grid points") from None
    cell = result.cell(N or config.N_grid[-1])
    ok = cell.ok
    scaled = math.sqrt(cell.N) * (cell.f_hat[ok, g] - result.reference.f_grid[g])
    out = ks_normality(scaled, float(result.reference.sigma2_grid[g]))
    out.update({"x": float(x), "N": cell.N, "R": int(ok.sum())})
    return out


def _binomial_sd(p: float, R: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / R) if R else math.inf


def validate_bounds(result: ExperimentResult, config: ExperimentConfig | None = None) -> dict:
    """Compare empirical tail frequencies with the Chebyshev and functional bounds.

    A bound counts as respected when the empirical frequency is within three
    binomial standard errors of it. The ``euclidean`` entries report the
    ``||u||**2``-weighted functional band for reference only.
    """
    config = config or result.config
    ref = result.reference
    absD = abs_matrix(ref.D)
    report = {"per_N": [], "all_respected": True}
    for cell in result.cells:
        N = cell.N
        R = len(cell.status)
        delta = cell.d_hat - ref.model.d
        stat2 = np.einsum("ri,ij,rj->r", delta, absD, delta)
        cheb = []
        for a in config.chebyshev_a:
            bound = chebyshev_tail(ref.sigma_h, ref.D, N, a)
            rate = float(np.mean(stat2 > a * a))
            sd = _binomial_sd(bound, R)
            ok = rate <= bound + 3 * sd
            cheb.append({"a": a, "bound": bound, "exceedance": rate, "sigma": sd, "respected": bool(ok)})
            report["all_respected"] &= bool(ok)
        funcs = []
        okmask = cell.ok
        n_ok = int(okmask.sum())
        for k, spec in enumerate(config.functionals):
            band = corollary_band(ref.model, ref.D, ref.sigma_h, spec.g, N, spec.a)
            band_euclid = corollary_band(ref.model, ref.D, ref.sigma_h, spec.g, N, spec.a, weighting="euclidean")
            dev = cell.functionals[okmask, k] - ref.functional_values[k]
            coverage = float(np.mean(np.abs(dev) <= spec.a)) if n_ok else float("nan")
            sd = _binomial_sd(band, n_ok)
            ok = coverage >= band - 3 * sd
            funcs.append(
                {
                    "label": spec.label,
                    "a": spec.a,
                    "band": band,
                    "coverage": coverage,
                    "sigma": sd,
                    "respected": bool(ok),
                    "band_euclidean": band_euclid,
                    "respected_euclidean": bool(coverage >= band_euclid - 3 * _binomial_sd(band_euclid, n_ok)),
                    "sigma2_g": clt_sigma2_g(ref.model, ref.D, ref.sigma_h, spec.g),
                    "empirical_var_scaled": float(N * np.var(dev, ddof=1)) if n_ok > 1 else None,
                }
            )
            report["all_respected"] &= bool(ok)
        report["per_N"].append({"N": N, "replicates": R, "chebyshev": cheb, "functionals": funcs})
    return report
