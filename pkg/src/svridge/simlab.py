"""Synthetic test functions and the Monte-Carlo comparison harness."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .basis import design_matrix, make_basis
from .core import Dataset, FitError, SvridgeError
from .gic import gamma_select
from .ridge import ridge_select
from .svreg import SvrOptions

log = logging.getLogger(__name__)

METHODS = ("svr", "ridge")
MAX_FAILURE_RATE = 0.10

_SURFACE_WIDE = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25]])
_SURFACE_NARROW = np.array([[0.6, 0.6], [0.6, 0.9], [0.9, 0.6], [0.9, 0.9]])


def _peak10(x):
    x = x[..., 0]
    return np.sin(x) + 2.0 * np.exp(-30.0 * x**2)


def _chirp11(x):
    # exp of x cubed: smooth on [0, 0.5], oscillating on (0.5, 1]
    x = x[..., 0]
    return np.sin(32.0 * np.exp(x**3))


def _surface13(x):
    d_wide = ((x[..., None, :] - _SURFACE_WIDE) ** 2).sum(-1)
    d_narrow = ((x[..., None, :] - _SURFACE_NARROW) ** 2).sum(-1)
    return np.exp(-30.0 * d_wide).sum(-1) + np.exp(-100.0 * d_narrow).sum(-1)


FUNCTIONS = {
    "peak10": (_peak10, ((-2.0, 2.0),)),
    "chirp11": (_chirp11, ((0.0, 1.0),)),
    "surface13": (_surface13, ((0.0, 1.0), (0.0, 1.0))),
}


def function_domain(function_id):
    try:
        return FUNCTIONS[function_id][1]
    except KeyError:
        raise ValueError(f"unknown function {function_id!r}; choose from {sorted(FUNCTIONS)}") from None


def true_function(function_id, x):
    """Evaluate a test function; ``x`` is a scalar, a point, or an (n, p) array.

    Raises ``ValueError`` for points outside the function's domain.
    """
    f, dom = FUNCTIONS.get(function_id, (None, None))
    if f is None:
        function_domain(function_id)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0 or (arr.ndim == 1 and len(dom) > 1)
    pts = arr.reshape(-1, len(dom))
    lo = np.array([d[0] for d in dom])
    hi = np.array([d[1] for d in dom])
    if np.any((pts < lo) | (pts > hi)):
        raise ValueError(f"x outside the domain {dom} of {function_id}")
    out = f(pts)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class Truth:
    """Handle on the noise-free function behind a simulated dataset."""

    function_id: str

    def __call__(self, x):
        return true_function(self.function_id, x)


@dataclass(frozen=True)
class SimConfig:
    function_id: str
    n: int
    alpha: float
    trials: int = 20
    seed: int = 0
    methods: tuple = METHODS
    m_per_dim: int | None = None
    width_scale: float = 1.0
    gamma_grid: tuple | None = None
    lambda_grid: tuple | None = None
    boundary_mode: str = "paper"
    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        function_domain(self.function_id)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        methods = tuple(self.methods)
        bad = set(methods) - set(METHODS)
        if bad or not methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        object.__setattr__(self, "methods", methods)
        if self.gamma_grid is not None:
            object.__setattr__(self, "gamma_grid", tuple(tuple(map(float, g)) for g in self.gamma_grid))
        if self.lambda_grid is not None:
            object.__setattr__(self, "lambda_grid", tuple(map(float, self.lambda_grid)))

    @property
    def dims(self):
        return len(function_domain(self.function_id))

    def basis(self):
        return make_basis(function_domain(self.function_id), self.m_per_dim, self.width_scale)

    def svr_options(self):
        return SvrOptions(1.0, 1.0, tol=self.tol, max_iter=self.max_iter,
                          boundary_mode=self.boundary_mode)

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


def design_points(function_id, n):
    """Equally spaced design including the endpoints; a sqrt(n) grid in 2-d."""
    dom = function_domain(function_id)
    if len(dom) == 1:
        return np.linspace(dom[0][0], dom[0][1], n)[:, None]
    k = math.isqrt(n)
    if k * k != n:
        raise ValueError(f"surface designs need a perfect-square n, got {n}")
    axes = [np.linspace(lo, hi, k) for lo, hi in dom]
    g1, g2 = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def trial_rng(seed, trial):
    """Independent generator for one trial, keyed only by ``(seed, trial)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial)]))


def generate(config: SimConfig, trial: int):
    """Simulated dataset for one trial and a handle on its true function."""
    if not 0 <= trial < config.trials:
        raise ValueError(f"trial {trial} out of range for {config.trials} trials")
    xs = design_points(config.function_id, config.n)
    g = true_function(config.function_id, xs)
    eps = trial_rng(config.seed, trial).normal(0.0, math.sqrt(config.alpha), config.n)
    ds = Dataset(xs, g + eps, domain=function_domain(config.function_id))
    return ds, Truth(config.function_id)


def mse(fit, spec, dataset: Dataset, truth) -> float:
    """Mean squared gap between the fitted and the true function at the design points."""
    fitted = spec.evaluate(dataset.xs) @ fit.params.beta
    gap = fitted - truth(dataset.xs)
    return float(np.mean(gap**2))


@dataclass
class SimReport:
    config: dict
    trials: list = field(default_factory=list)
    failed_trials: list = field(default_factory=list)
    runtime_s: float = 0.0
    summary: dict = field(default_factory=dict)
    status: str = "ok"
    # trial -> {method: FitResult}; only filled on request and never serialised
    fits: dict = field(default_factory=dict, repr=False, compare=False)

    def per_method_mse(self, method):
        return [t["mse"][method] for t in self.trials if method in t["mse"]]

    def recompute_summary(self):
        out = {}
        for method in self.config["methods"]:
            v = np.array(self.per_method_mse(method))
            out[method] = {
                "mean_mse": float(v.mean()) if v.size else float("nan"),
                "sd_mse": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "n_trials": int(v.size),
            }
        return out

    def to_dict(self):
        return {
            "config": self.config,
            "summary": self.summary,
            "trials": self.trials,
            "failed_trials": self.failed_trials,
            "runtime_s": self.runtime_s,
            "status": self.status,
        }


def run_trial(config: SimConfig, trial: int, keep_fits=False):
    """Generate one dataset and fit each requested method with its own selection."""
    ds, truth = generate(config, trial)
    spec = config.basis()
    dm = design_matrix(spec, ds)
    rec = {"trial": trial, "mse": {}, "selected": {}, "converged": {}, "iterations": {}}
    fits = {}
    for method in config.methods:
        if method == "ridge":
            lam, fit = ridge_select(dm, ds.ys, config.lambda_grid)
            rec["selected"]["ridge"] = lam
        else:
            gam, fit = gamma_select(dm, ds.ys, config.gamma_grid, config.svr_options())
            rec["selected"]["svr"] = list(gam)
        rec["mse"][method] = mse(fit, spec, ds, truth)
        rec["converged"][method] = fit.converged
        rec["iterations"][method] = fit.iterations
        fits[method] = fit
    if keep_fits:
        return rec, fits, ds
    return rec


def _safe_trial(config, trial, keep_fits=False):
    try:
        if keep_fits:
            rec, fits, _ = run_trial(config, trial, keep_fits=True)
            return rec, fits
        return run_trial(config, trial), None
    except (SvridgeError, np.linalg.LinAlgError, ValueError) as exc:
        log.warning("trial %d failed: %s", trial, exc)
        return {"trial": trial, "error": str(exc)}, None


def run_benchmark(config: SimConfig, n_jobs=1, keep_fits=False) -> SimReport:
    """Run every trial, aggregate MSE per method, and time the batch.

    Failed trials are excluded from the summary and listed in
    ``failed_trials``; if more than 10% fail the report status is "failed".
    """
    t0 = time.perf_counter()
    if n_jobs == 1:
        out = [_safe_trial(config, t, keep_fits) for t in range(config.trials)]
    else:
        out = Parallel(n_jobs=n_jobs)(
            delayed(_safe_trial)(config, t, keep_fits) for t in range(config.trials)
        )
    out.sort(key=lambda pair: pair[0]["trial"])
    report = SimReport(config=config.to_dict())
    for r, fits in out:
        if "error" in r:
            report.failed_trials.append(r)
        else:
            report.trials.append(r)
            if fits is not None:
                report.fits[r["trial"]] = fits
    report.summary = report.recompute_summary()
    report.runtime_s = time.perf_counter() - t0
    if len(report.failed_trials) > MAX_FAILURE_RATE * config.trials:
        report.status = "failed"
        log.warning("%d of %d trials failed", len(report.failed_trials), config.trials)
    return report
