"""Fitting the Woods-Saxon depth formula U0 = u + a(N-Z)/A + bZ + cN + d/A.

For each nucleus the depth U* reproducing the experimental energy is found by
bisection, together with the band of depths that stay within 0.3 MeV per nucleon.
The five coefficients are then fitted to the U* values by linear least squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .interactions import SecondQuantizedHamiltonian, residual_terms
from .meanfield import MeanFieldParams, NucleusSpec, one_body_matrix
from .constants import NEUTRON, PROTON
from .oracle import build_sector_operator, ground_state

BAND_PER_NUCLEON = 0.3  # MeV
COLUMNS = ("u", "a", "b", "c", "d")


class BracketError(ValueError):
    pass


class RankDeficientError(ValueError):
    def __init__(self, message: str, dependent: list[str]):
        super().__init__(message)
        self.dependent = dependent


@dataclass(frozen=True)
class FitRecord:
    name: str
    Z: int
    N: int
    E_exp: float
    U_star: float
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low <= self.U_star <= self.high:
            raise ValueError(f"U*={self.U_star} outside its band [{self.low}, {self.high}]")

    @property
    def A(self) -> int:
        return self.Z + self.N


@dataclass(frozen=True)
class FieldFormulaParams:
    u: float
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError("depth-formula parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.a, self.b, self.c, self.d])


PAPER_PARAMS = FieldFormulaParams(-33.65, 5.175, 1.46, -1.82, -33.57)
FIT_SET = ("3H", "3He", "6Li", "12C", "14N")


def design_row(Z: int, N: int) -> np.ndarray:
    A = Z + N
    if A < 1:
        raise ValueError("nucleus needs at least one nucleon")
    return np.array([1.0, (N - Z) / A, float(Z), float(N), 1.0 / A])


def predict_u0(params: FieldFormulaParams, Z: int, N: int) -> float:
    return float(design_row(Z, N) @ params.as_array())


class EnergyModel:
    """Sector ground energy as a function of U0 for one nucleus.

    The residual two-body part does not depend on U0, so its sector matrix is built
    once; each evaluation only rebuilds the one-body part.
    """

    def __init__(self, nucleus: NucleusSpec, params: MeanFieldParams = MeanFieldParams(), G: float = 0.25,
                 include_coulomb: bool = True):
        self.nucleus = nucleus
        self.params = params
        cat = nucleus.catalog
        zero_p = np.zeros((cat.n_proton_orbits,) * 2)
        zero_n = np.zeros((cat.n_neutron_orbits,) * 2)
        terms = residual_terms(nucleus, G, include_coulomb)
        self._two_body, self.basis = build_sector_operator(SecondQuantizedHamiltonian(nucleus, zero_p, zero_n, terms))
        self.evaluations = 0

    def hamiltonian_matrix(self, U0: float):
        g = one_body_matrix(self.nucleus.catalog, self.params.with_depth(U0), self.nucleus)
        one, _ = build_sector_operator(SecondQuantizedHamiltonian(self.nucleus, g[PROTON], g[NEUTRON], ()))
        return one + self._two_body

    def __call__(self, U0: float) -> float:
        self.evaluations += 1
        energy, _ = ground_state(self.hamiltonian_matrix(U0))
        return energy


def energy_vs_u0(nucleus: NucleusSpec, U0: float, params: MeanFieldParams = MeanFieldParams(), G: float = 0.25,
                 include_coulomb: bool = True) -> float:
    """Exact sector ground energy (MeV) of the nucleus at depth U0."""
    return EnergyModel(nucleus, params, G, include_coulomb)(U0)


def _as_function(target, **kw) -> Callable[[float], float]:
    if isinstance(target, NucleusSpec):
        return EnergyModel(target, **kw)
    if callable(target):
        return target
    raise TypeError("expected a NucleusSpec or a callable E(U0)")


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float, max_iter: int = 200) -> float:
    """Root of f in [lo, hi] with |f(x)| <= tol; f(lo) and f(hi) must differ in sign."""
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) <= tol:
        return lo
    if abs(f_hi) <= tol:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f = {f_lo:.6g}, {f_hi:.6g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    raise BracketError(f"bisection stalled near {0.5 * (lo + hi)!r} without reaching |f| <= {tol}")


@dataclass(frozen=True)
class UStarResult:
    U_star: float
    low: float
    high: float
    energy: float


def _expand(f, start: float, direction: float, step: float, limit: int = 40) -> tuple[float, float]:
    """Walk from ``start`` until f changes sign; returns a bracketing pair."""
    a, fa = start, f(start)
    for k in range(1, limit + 1):
        b = start + direction * step * k
        b = min(b, 0.0)  # depths stay attractive
        fb = f(b)
        if np.sign(fb) != np.sign(fa) or fb == 0:
            return (a, b) if a < b else (b, a)
        a, fa = b, fb
        if b == 0.0:
            break
    raise BracketError(f"no sign change found walking from U0={start} (direction {direction:+})")


def find_ustar(
    target,
    E_target: float,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-3,
    guess: float = -45.0,
    mass_number: int | None = None,
    band: float = BAND_PER_NUCLEON,
    **model_kw,
) -> UStarResult:
    """Depth U* with ``|E(U*) - E_target| <= tol`` plus the allowable band.

    ``target`` is a :class:`NucleusSpec` or any callable E(U0).  The band holds the
    depths for which ``|E - E_target| <= band * A``; it needs A, taken from the nucleus
    or ``mass_number`` (without either the band collapses to U* itself).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = _as_function(target, **model_kw)
    if bracket is None:
        bracket = (guess - 5.0, guess + 5.0)
    lo, hi = sorted(bracket)
    u_star = bisect_root(lambda u: f(u) - E_target, lo, hi, tol)
    A = target.A if isinstance(target, NucleusSpec) else mass_number
    if not A:
        return UStarResult(u_star, u_star, u_star, f(u_star))
    width = band * A
    edges = []
    for shift in (-width, +width):
        g = lambda u, s=shift: f(u) - (E_target + s)
        # E decreases as U0 gets deeper, so the lower target lies at deeper U0
        direction = -1.0 if shift < 0 else 1.0
        a, b = _expand(g, u_star, direction, 0.5)
        edges.append(bisect_root(g, a, b, tol))
    low, high = sorted(edges)
    return UStarResult(u_star, min(low, u_star), max(high, u_star), f(u_star))


def fit_record(nucleus: NucleusSpec, E_exp: float, name: str = "", **kw) -> FitRecord:
    res = find_ustar(nucleus, E_exp, **kw)
    return FitRecord(name or nucleus.name, nucleus.Z, nucleus.N, E_exp, res.U_star, res.low, res.high)


def design_matrix(records: Sequence[FitRecord]) -> np.ndarray:
    return np.array([design_row(r.Z, r.N) for r in records])


def dependent_columns(X: np.ndarray) -> list[str]:
    """Columns that pivoted QR finds linearly dependent on the others."""
    _, r_mat, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_mat))
    rank = int(np.sum(diag > 1e-10 * diag[0]))
    return [COLUMNS[k] for k in piv[rank:]]


def fit_parameters(records: Sequence[FitRecord], min_norm: bool = False) -> FieldFormulaParams:
    """Least-squares (u, a, b, c, d) from the normal equations of the U* records.

    A rank-deficient design raises :class:`RankDeficientError` naming the dependent
    columns, unless ``min_norm`` asks for the minimum-norm least-squares solution.
    """
    if len(records) < len(COLUMNS):
        raise ValueError(f"need at least {len(COLUMNS)} records, got {len(records)}")
    X = design_matrix(records)
    y = np.array([r.U_star for r in records])
    dependent = dependent_columns(X)
    if dependent:
        if min_norm:
            return FieldFormulaParams(*scipy.linalg.lstsq(X, y)[0])
        raise RankDeficientError(
            f"design matrix has rank {5 - len(dependent)} < 5; "
            f"linearly dependent columns: {', '.join(dependent)}",
            dependent,
        )
    # equilibrate the columns so the normal matrix stays well conditioned
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    beta = scipy.linalg.solve(Xs.T @ Xs, Xs.T @ y, assume_a="pos") / scale
    return FieldFormulaParams(*beta)


def residuals(records: Sequence[FitRecord], params: FieldFormulaParams) -> np.ndarray:
    return np.array([predict_u0(params, r.Z, r.N) - r.U_star for r in records])


def format_report(records: Sequence[FitRecord], params: FieldFormulaParams | None) -> str:
    lines = ["nucleus  Z  N   E_exp/MeV    U*/MeV   band/MeV"]
    for r in records:
        lines.append(f"{r.name:<7} {r.Z:>2} {r.N:>2} {r.E_exp:>10.3f} {r.U_star:>9.4f}   {r.low:.4f} ~ {r.high:.4f}")
    if params is not None:
        lines.append("")
        lines.append("U0 = u + a(N-Z)/A + bZ + cN + d/A")
        lines.append("  " + "  ".join(f"{k}={v:.6g}" for k, v in zip(COLUMNS, params.as_array())))
        res = residuals(records, params)
        lines.append("  residuals: " + ", ".join(f"{r.name}={v:+.4g}" for r, v in zip(records, res)))
    return "\n".join(lines) + "\n"
