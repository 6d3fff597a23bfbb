"""Statistics behind the acceptance verdicts.

Everything here is a deterministic function of its inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _st

from treelocal.errors import CapacityError, DomainError


@dataclass
class TestReport:
    """One pass/fail verdict: ``passed`` iff ``statistic <= threshold``."""

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    threshold: float
    sizes: dict = field(default_factory=dict)
    seed: int | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.threshold)

    def row(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        d["sizes"] = json.dumps(self.sizes, sort_keys=True)
        return d

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: statistic={self.statistic:.6g} threshold={self.threshold:.6g} {self.note}".rstrip()


REPORT_COLUMNS = ("name", "statistic", "threshold", "pass", "sizes", "seed", "note")


def ks_stat(a, b=None, cdf: Callable | None = None) -> float:
    """Kolmogorov-Smirnov distance: two-sample if ``b`` is given, else against ``cdf``."""
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise DomainError("empty sample")
    if b is not None:
        b = np.asarray(b, dtype=float).ravel()
        if b.size == 0:
            raise DomainError("empty sample")
        return float(_st.ks_2samp(a, b, method="asymp").statistic)
    if cdf is None:
        raise DomainError("need a second sample or a reference cdf")
    return float(_st.kstest(a, cdf).statistic)


def ks_critical(n1: int, n2: int | None = None, alpha: float = 1e-3) -> float:
    """Asymptotic KS critical value at level ``alpha``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    ne = n1 if n2 is None else n1 * n2 / (n1 + n2)
    return c / math.sqrt(ne)


def chi2_gof(samples, cdf: Callable, bins: int = 50) -> float:
    """p-value of a chi-square goodness of fit on equiprobable-ish sample quantile bins."""
    x = np.sort(np.asarray(samples, dtype=float))
    edges = np.quantile(x, np.linspace(0, 1, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    obs = np.histogram(x, edges)[0]
    probs = np.diff(cdf(edges))
    exp = probs / probs.sum() * x.size
    return float(_st.chisquare(obs, exp, ddof=0).pvalue)


@dataclass(frozen=True)
class TailFit:
    slope: float  # of log survival against u
    rate: float  # beta in log S = const + log u - beta u
    exceedances: int


def tail_slope(samples, window: tuple[float, float], points: int = 16, min_exceed: int = 100) -> TailFit:
    """Least-squares tail exponents of the empirical survival function on ``window``."""
    x = np.asarray(samples, dtype=float)
    u1, u2 = window
    if not u2 > u1:
        raise DomainError("window must be increasing")
    exceed = int(np.sum(x > u2))
    if np.sum(x > u1) < min_exceed or exceed == 0:
        raise CapacityError(f"too few samples beyond the window ({int(np.sum(x > u1))} above u1)")
    us = np.linspace(u1, u2, points)
    surv = np.array([np.mean(x > u) for u in us])
    A = np.vstack([np.ones_like(us), us]).T
    logs = np.log(surv)
    slope = np.linalg.lstsq(A, logs, rcond=None)[0][1]
    corrected = np.linalg.lstsq(A, logs - np.log(us), rcond=None)[0][1] if u1 > 0 else np.nan
    return TailFit(float(slope), float(-corrected), int(np.sum(x > u1)))


def laplace_mixture(masses, u, kappa: float, b: int = 2) -> np.ndarray:
    """u -> mean_i exp(-kappa * Z_i * exp(-2 u sqrt(log b)))."""
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    Z = np.asarray(masses, dtype=float)
    if np.any(Z < 0):
        raise DomainError("masses must be >= 0")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    rate = 2 * math.sqrt(math.log(b))
    return np.exp(-kappa * np.outer(np.exp(-rate * u), Z)).mean(axis=1)


def fit_kappa(masses, target: float, u: float, b: int = 2) -> float:
    """The scale kappa making the Laplace mixture hit ``target`` at ``u``."""
    from scipy.optimize import brentq

    Z = np.asarray(masses, dtype=float)
    lo_val = laplace_mixture(Z, u, 1e-12, b)[0]
    hi_val = laplace_mixture(Z, u, 1e12, b)[0]
    if not hi_val <= target <= lo_val:
        raise CapacityError("target outside the range of the mixture")
    f = lambda lk: laplace_mixture(Z, u, math.exp(lk), b)[0] - target
    return math.exp(brentq(f, math.log(1e-12), math.log(1e12), xtol=1e-12))


def dispersion(counts: Sequence[float]) -> float:
    """Index of dispersion (variance over mean) of cell counts."""
    c = np.asarray(counts, dtype=float)
    if c.size < 2:
        raise DomainError("need at least two cells")
    m = c.mean()
    if m == 0:
        return 0.0
    return float(c.var(ddof=1) / m)


def covariance_z(x: np.ndarray, y: np.ndarray, target: float) -> float:
    """|sample covariance - target| in standard errors (delta-method estimate)."""
    xc = x - x.mean()
    yc = y - y.mean()
    prod = xc * yc
    se = prod.std(ddof=1) / math.sqrt(len(x))
    return float(abs(prod.mean() - target) / se) if se > 0 else float("inf")
