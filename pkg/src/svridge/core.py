"""Domain types, dataset validation and CSV ingestion.

Every type here validates itself at construction and freezes its arrays, so
instances can be shared freely between worker threads or processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


class SvridgeError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SvridgeError, ValueError):
    """Malformed or invalid input data.

    ``row`` is 1-based over data rows (the header is row 0) and ``column`` is
    the column name; either may be ``None`` when not applicable.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"col {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)


class CompatibilityError(SvridgeError, ValueError):
    """Dataset and basis disagree on dimension or domain."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class FitError(SvridgeError, ArithmeticError):
    """A numerical failure during fitting."""


class SingularSystemError(FitError):
    pass


class DegenerateVarianceError(FitError):
    """The noise-variance iterate collapsed (the fit interpolates the data)."""


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Design points ``xs`` (n, p), responses ``ys`` (n,) and a box domain."""

    xs: np.ndarray
    ys: np.ndarray
    domain: tuple[tuple[float, float], ...] = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.ndim != 2:
            raise DataError("xs must be a 2-d array")
        if xs.shape[0] < 1:
            raise DataError("dataset has zero rows")
        if xs.shape[0] != ys.shape[0]:
            raise DataError(f"xs has {xs.shape[0]} rows but ys has {ys.shape[0]}")
        bad = np.argwhere(~np.isfinite(xs))
        if bad.size:
            i, j = bad[0]
            raise DataError("non-finite value", row=int(i) + 1, column=f"x{j + 1}")
        bad = np.flatnonzero(~np.isfinite(ys))
        if bad.size:
            raise DataError("non-finite value", row=int(bad[0]) + 1, column="y")
        domain = self.domain
        if domain is None:
            domain = tuple((float(lo), float(hi)) for lo, hi in zip(xs.min(0), xs.max(0)))
        else:
            domain = _normalize_domain(domain, xs.shape[1])
        for j, (lo, hi) in enumerate(domain):
            outside = np.flatnonzero((xs[:, j] < lo) | (xs[:, j] > hi))
            if outside.size:
                raise DataError(
                    f"point outside domain [{lo}, {hi}]",
                    row=int(outside[0]) + 1,
                    column=f"x{j + 1}",
                )
        object.__setattr__(self, "xs", _frozen(xs))
        object.__setattr__(self, "ys", _frozen(ys))
        object.__setattr__(self, "domain", domain)

    @property
    def n(self):
        return self.xs.shape[0]

    @property
    def p(self):
        return self.xs.shape[1]

    def to_csv(self, path_or_buf=None, x_names=None, y_name="y"):
        """Write the dataset as CSV; returns the text when no target is given."""
        x_names = x_names or [f"x{j + 1}" for j in range(self.p)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*x_names, y_name])
        for x, y in zip(self.xs, self.ys):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            Path(path_or_buf).write_text(text, encoding="utf-8")
        return None


def _normalize_domain(domain, p):
    dom = np.asarray(domain, dtype=float)
    if dom.shape == (2,):
        dom = np.tile(dom, (p, 1))
    if dom.shape != (p, 2):
        raise DataError(f"domain must give {p} (lo, hi) pairs")
    if np.any(~np.isfinite(dom)) or np.any(dom[:, 0] > dom[:, 1]):
        raise DataError("domain bounds must be finite with lo <= hi")
    return tuple((float(lo), float(hi)) for lo, hi in dom)


@dataclass(frozen=True)
class ModelParams:
    """Noise variance ``alpha`` and basis coefficients ``beta``."""

    alpha: float
    beta: np.ndarray

    def __post_init__(self):
        alpha = float(self.alpha)
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValueError(f"alpha must be positive and finite, got {alpha}")
        beta = np.asarray(self.beta, dtype=float).ravel()
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta has non-finite entries")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", _frozen(beta))

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(alpha=d["alpha"], beta=d["beta"])


@dataclass(frozen=True)
class LambdaState:
    """Per-coefficient tuning parameters and the two hyper-tuning parameters."""

    lam: np.ndarray
    gamma1: float
    gamma2: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        if lam.size == 0 or not np.all(lam > 0) or not np.all(np.isfinite(lam)):
            raise ValueError("every lambda_j must be positive and finite")
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be positive")
        object.__setattr__(self, "lam", _frozen(lam))
        object.__setattr__(self, "gamma1", float(self.gamma1))
        object.__setattr__(self, "gamma2", float(self.gamma2))

    def to_dict(self):
        return {"lambda": self.lam.tolist(), "gamma1": self.gamma1, "gamma2": self.gamma2}

    @classmethod
    def from_dict(cls, d):
        return cls(lam=d["lambda"], gamma1=d["gamma1"], gamma2=d["gamma2"])


GIC_MODES = ("expected", "empirical")


@dataclass(frozen=True)
class GicReport:
    """GIC decomposition: ``total == neg2_loglik + bias_term`` exactly."""

    neg2_loglik: float
    bias_term: float
    mode: str = "expected"
    total: float = field(default=None)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.mode not in GIC_MODES:
            raise ValueError(f"mode must be one of {GIC_MODES}")
        total = float(self.neg2_loglik) + float(self.bias_term)
        if self.total is not None and self.total != total:
            raise ValueError("total must equal neg2_loglik + bias_term")
        object.__setattr__(self, "neg2_loglik", float(self.neg2_loglik))
        object.__setattr__(self, "bias_term", float(self.bias_term))
        object.__setattr__(self, "total", total)

    def to_dict(self):
        d = {
            "neg2_loglik": self.neg2_loglik,
            "bias_term": self.bias_term,
            "total": self.total,
            "mode": self.mode,
        }
        if self.info:
            d["info"] = _jsonable(self.info)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            neg2_loglik=d["neg2_loglik"],
            bias_term=d["bias_term"],
            mode=d["mode"],
            total=d["total"],
            info=d.get("info", {}),
        )


@dataclass(frozen=True)
class FitResult:
    """A fitted model together with its iteration diagnostics.

    ``lambda_state`` is a :class:`LambdaState` for the smoothly varying fit
    and a plain float for ridge.
    """

    params: ModelParams
    lambda_state: Any
    objective_trace: tuple = ()
    iterations: int = 0
    converged: bool = False
    gic: GicReport | None = None
    method: str = ""
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        trace = tuple(float(v) for v in self.objective_trace)
        if self.iterations >= 1 and not trace:
            raise ValueError("objective_trace must be non-empty after an iteration")
        object.__setattr__(self, "objective_trace", trace)
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "converged", bool(self.converged))

    @property
    def beta(self):
        return self.params.beta

    @property
    def alpha(self):
        return self.params.alpha

    @property
    def lam(self):
        """Tuning parameters as an m-vector (ridge's scalar is broadcast)."""
        if isinstance(self.lambda_state, LambdaState):
            return self.lambda_state.lam
        return np.full(self.beta.size, float(self.lambda_state))

    def with_gic(self, gic):
        return FitResult(
            params=self.params,
            lambda_state=self.lambda_state,
            objective_trace=self.objective_trace,
            iterations=self.iterations,
            converged=self.converged,
            gic=gic,
            method=self.method,
            provenance=self.provenance,
        )

    def to_dict(self):
        ls = self.lambda_state
        return {
            "method": self.method,
            "params": self.params.to_dict(),
            "lambda_state": ls.to_dict() if isinstance(ls, LambdaState) else float(ls),
            "objective_trace": list(self.objective_trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "gic": None if self.gic is None else self.gic.to_dict(),
            "provenance": _jsonable(self.provenance),
        }

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        ls = d["lambda_state"]
        return cls(
            params=ModelParams.from_dict(d["params"]),
            lambda_state=LambdaState.from_dict(ls) if isinstance(ls, dict) else float(ls),
            objective_trace=d["objective_trace"],
            iterations=d["iterations"],
            converged=d["converged"],
            gic=None if d.get("gic") is None else GicReport.from_dict(d["gic"]),
            method=d.get("method", ""),
            provenance=d.get("provenance", {}),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _read_source(source):
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, Path):
        if not source.exists():
            raise DataError("dataset: not found")
        return source.read_text(encoding="utf-8")
    if isinstance(source, str) and ("\n" in source or "," in source):
        return source
    path = Path(source)
    if not path.exists():
        raise DataError("dataset: not found")
    return path.read_text(encoding="utf-8")


def load_dataset(
    source,
    x_columns: Sequence[str] | None = None,
    y_column: str = "y",
    domain=None,
) -> Dataset:
    """Parse a CSV table into a :class:`Dataset`.

    Parameters
    ----------
    source : str, path or file-like
        CSV text (anything containing a newline or comma), a path, or an open
        text handle. The first row must be a header.
    x_columns : sequence of str, optional
        Names of the design columns. Defaults to every ``x1, x2, ...`` column
        present in the header, in numeric order.
    y_column : str
        Name of the response column.
    domain : optional
        Per-dimension ``(lo, hi)`` bounds; defaults to the observed range.

    Raises
    ------
    DataError
        On a missing column, non-numeric or non-finite cell, or zero data
        rows. Row numbers count data rows from 1.
    """
    text = _read_source(source)
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty input: no header row") from None
    if x_columns is None:
        x_columns = sorted(
            (h for h in header if h.startswith("x") and h[1:].isdigit()),
            key=lambda h: int(h[1:]),
        )
        if not x_columns:
            raise DataError("missing column", column="x1")
    for name in [*x_columns, y_column]:
        if name not in header:
            raise DataError("missing column", column=name)
    idx = [header.index(c) for c in x_columns]
    iy = header.index(y_column)

    xs, ys = [], []
    for r, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        vals = []
        for name, k in [*zip(x_columns, idx), (y_column, iy)]:
            if k >= len(row):
                raise DataError("missing cell", row=r, column=name)
            cell = row[k].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r}", row=r, column=name) from None
            if not math.isfinite(v):
                raise DataError("non-finite value", row=r, column=name)
            vals.append(v)
        xs.append(vals[:-1])
        ys.append(vals[-1])
    if not ys:
        raise DataError("zero data rows")
    return Dataset(np.array(xs), np.array(ys), domain=domain)


def validate_compatibility(dataset: Dataset, spec) -> None:
    """Check that ``dataset`` can be expanded in the basis ``spec``.

    Raises :class:`CompatibilityError` on a dimension mismatch or when a
    design point falls outside the basis domain (the first offending row
    index, 0-based, is attached as ``index``).
    """
    if dataset.p != spec.dims:
        raise CompatibilityError(
            f"dimension mismatch: dataset has p={dataset.p}, basis has dims={spec.dims}"
        )
    lo = np.array([d[0] for d in spec.domain])
    hi = np.array([d[1] for d in spec.domain])
    slack = 1e-12 * np.maximum(1.0, hi - lo)
    bad = np.flatnonzero(np.any((dataset.xs < lo - slack) | (dataset.xs > hi + slack), axis=1))
    if bad.size:
        i = int(bad[0])
        raise CompatibilityError(
            f"out-of-domain point at index {i}: {dataset.xs[i].tolist()}", index=i
        )


def default_output_dir():
    return Path(os.environ.get("SVRIDGE_OUTPUT_DIR", "."))
