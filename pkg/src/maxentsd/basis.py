"""Constraint functions ``h_k`` and moment estimation from samples.

The constant function ``h_0 = 1`` (with target ``d_0 = 1``) is never stored;
normalization is handled separately by the solver.
"""
from __future__ import annotations

import csv
import math
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError, InfeasibleError, InputError
from .quadrature import FINITE, SupportSpec

POWERS = "powers"
EXPONENTIALS = "exponentials"
TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class MomentBasis:
    """The functions ``h_1, ..., h_M``.

    ``powers`` evaluates ``x**p`` for each entry of ``exponents``;
    ``exponentials`` evaluates the Laplace kernels ``exp(-alpha_k x)``;
    ``tabulated`` interpolates user-provided values linearly between the
    abscissas ``table_x`` (``table_h`` has one row per function).
    """

    family: str
    exponents: tuple = ()
    alphas: tuple = ()
    table_x: np.ndarray | None = None
    table_h: np.ndarray | None = None

    def __post_init__(self):
        if self.family == POWERS:
            exps = tuple(int(p) for p in self.exponents)
            if not exps or any(p <= 0 for p in exps) or any(p != q for p, q in zip(exps, self.exponents)):
                raise ConfigurationError("powers basis needs positive integer exponents")
            if len(set(exps)) != len(exps):
                raise ConfigurationError("powers basis exponents must be distinct")
            object.__setattr__(self, "exponents", exps)
        elif self.family == EXPONENTIALS:
            alphas = tuple(float(a) for a in self.alphas)
            if not alphas or any(not (a > 0 and math.isfinite(a)) for a in alphas):
                raise ConfigurationError("exponentials basis needs positive finite alphas")
            if any(b <= a for a, b in zip(alphas, alphas[1:])):
                raise ConfigurationError("exponentials basis alphas must be strictly increasing")
            object.__setattr__(self, "alphas", alphas)
        elif self.family == TABULATED:
            tx = np.asarray(self.table_x, dtype=float)
            th = np.atleast_2d(np.asarray(self.table_h, dtype=float))
            if tx.ndim != 1 or tx.size < 2 or np.any(np.diff(tx) <= 0):
                raise ConfigurationError("tabulated basis needs strictly increasing table_x with >= 2 points")
            if th.shape[1] != tx.size or not np.all(np.isfinite(th)):
                raise ConfigurationError("table_h must be finite with one column per table_x entry")
            object.__setattr__(self, "table_x", tx)
            object.__setattr__(self, "table_h", th)
        else:
            raise ConfigurationError(f"unknown basis family {self.family!r}")

    @classmethod
    def powers(cls, exponents: Sequence[int]) -> "MomentBasis":
        return cls(POWERS, exponents=tuple(exponents))

    @classmethod
    def exponentials(cls, alphas: Sequence[float]) -> "MomentBasis":
        return cls(EXPONENTIALS, alphas=tuple(alphas))

    @classmethod
    def tabulated(cls, table_x, table_h) -> "MomentBasis":
        return cls(TABULATED, table_x=table_x, table_h=table_h)

    @property
    def M(self) -> int:
        if self.family == POWERS:
            return len(self.exponents)
        if self.family == EXPONENTIALS:
            return len(self.alphas)
        return self.table_h.shape[0]

    def __call__(self, x) -> np.ndarray:
        return eval_basis(self, x)

    def __eq__(self, other):
        if not isinstance(other, MomentBasis):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def to_dict(self) -> dict:
        if self.family == POWERS:
            return {"family": POWERS, "exponents": list(self.exponents)}
        if self.family == EXPONENTIALS:
            return {"family": EXPONENTIALS, "alphas": list(self.alphas)}
        return {"family": TABULATED, "table_x": self.table_x.tolist(), "table_h": self.table_h.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentBasis":
        family = doc.get("family")
        if family == POWERS:
            return cls.powers(doc.get("exponents", ()))
        if family == EXPONENTIALS:
            return cls.exponentials(doc.get("alphas", ()))
        if family == TABULATED:
            return cls.tabulated(doc.get("table_x"), doc.get("table_h"))
        raise ConfigurationError(f"unknown basis family {family!r}")


def eval_basis(basis: MomentBasis, x) -> np.ndarray:
    """Evaluate ``(h_1(x), ..., h_M(x))``.

    A scalar ``x`` gives a vector of length ``M``; an array of ``n`` points
    gives an ``(n, M)`` matrix.
    """
    xs = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xs)
    if basis.family == POWERS:
        out = flat[:, None] ** np.asarray(basis.exponents, dtype=float)
    elif basis.family == EXPONENTIALS:
        out = np.exp(-np.outer(flat, basis.alphas))
    else:
        out = np.stack([np.interp(flat, basis.table_x, row) for row in basis.table_h], axis=1)
    return out[0] if xs.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Targets ``d_1, ..., d_M`` (``d_0 = 1`` is implicit)."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        if d.size == 0 or not np.all(np.isfinite(d)):
            raise InputError("moment vector must be non-empty and finite")
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    def __len__(self):
        return self.d.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.d, dtype=dtype)

    def tolist(self) -> list:
        return self.d.tolist()


def check_feasible(basis: MomentBasis, support: SupportSpec, d) -> None:
    """Cheap necessary conditions on ``d``; raises :class:`InfeasibleError`.

    Each target must lie strictly between the extreme values of its
    ``h_k`` over the support. For Laplace kernels on ``[a, inf)`` with
    ``a >= 0`` this is ``0 < d_k < 1``, and ``d`` must also decrease in
    ``alpha``.
    """
    d = np.asarray(d, dtype=float)
    if d.size != basis.M:
        raise InputError(f"expected {basis.M} moments, got {d.size}")
    if basis.family == EXPONENTIALS and support.a >= 0 and support.kind != FINITE:
        if np.any(d <= 0) or np.any(d >= 1):
            raise InfeasibleError("Laplace transform values must satisfy 0 < d_k < 1")
        if np.any(np.diff(d) >= 0):
            raise InfeasibleError("Laplace transform values must decrease strictly in alpha")
        return
    lo, hi = _basis_range(basis, support)
    outside = (d <= lo) | (d >= hi)
    if outside.any():
        k = int(np.argmax(outside))
        raise InfeasibleError(
            f"target d_{k + 1}={float(d[k])!r} is outside the open range "
            f"({float(lo[k])!r}, {float(hi[k])!r}) of h_{k + 1} on the support"
        )


@lru_cache(maxsize=64)
def _basis_range(basis: MomentBasis, support: SupportSpec):
    if support.kind == FINITE:
        probe = np.linspace(support.a, support.b, 4097)
    else:
        probe = support.a + support.halfline_scale * np.concatenate(
            [np.linspace(0.0, 50.0, 4097), [1e3, 1e6]]
        )
    if basis.family == TABULATED:
        probe = np.union1d(probe, basis.table_x[support.contains(basis.table_x)])
    if support.contains(0.0):
        probe = np.union1d(probe, [0.0])
    h = eval_basis(basis, probe)
    lo, hi = h.min(axis=0), h.max(axis=0)
    if support.kind != FINITE and basis.family == POWERS:
        hi = np.full_like(hi, np.inf)
    return lo, hi


@dataclass(frozen=True, eq=False)
class SampleSet:
    """An i.i.d. sample ``X_1, ..., X_N`` inside the support."""

    values: np.ndarray
    support: SupportSpec | None = None
    seed: int | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if self.support is not None:
            bad = np.flatnonzero(~self.support.contains(values))
            if bad.size:
                rows = ", ".join(f"{int(i)}:{values[i]!r}" for i in bad[:10])
                more = "" if bad.size <= 10 else f" (+{bad.size - 10} more)"
                err = InputError(f"{bad.size} sample values outside the support; rows {rows}{more}")
                err.rows = bad.tolist()
                raise err
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.size

    @classmethod
    def from_csv(cls, path, support: SupportSpec | None = None) -> "SampleSet":
        """Read a one-column CSV with header ``x``."""
        with open(Path(path), newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != ["x"]:
                raise InputError(f"{path}: expected a single column with header 'x'")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or not row[0].strip():
                    continue
                try:
                    rows.append(float(row[0]))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: not a number: {row[0]!r}") from None
        return cls(np.array(rows), support)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            fh.write("x\n")
            for v in self.values:
                fh.write(f"{float(v)!r}\n")


def _values(sample) -> np.ndarray:
    return sample.values if isinstance(sample, SampleSet) else np.asarray(sample, dtype=float).reshape(-1)


def estimate_moments(basis: MomentBasis, sample) -> MomentVector:
    """Sample means ``(1/N) sum_n h_k(X_n)``."""
    x = _values(sample)
    if x.size == 0:
        raise InputError("cannot estimate moments from an empty sample")
    return MomentVector(eval_basis(basis, x).mean(axis=0))


def sample_covariance(basis: MomentBasis, sample) -> np.ndarray:
    """Unbiased (``1/(N-1)``) covariance matrix of the vectors ``h(X_n)``."""
    x = _values(sample)
    if x.size < 2:
        raise InputError(f"sample covariance needs at least 2 values, got {x.size}")
    h = eval_basis(basis, x)
    centered = h - h.mean(axis=0)
    cov = centered.T @ centered / (x.size - 1)
    return 0.5 * (cov + cov.T)
