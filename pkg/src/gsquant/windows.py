"""Gelfand-Shilov test functions and sampled seminorms."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from math import lgamma, log, pi

import numpy as np

from .grid import MAX_DERIVATIVE_ORDER, Grid, SampledFunction, spectral_derivative

HERMITE_MAX = 60
INTERIOR = 0.9


@dataclass(frozen=True)
class GevreyParams:
    """Gevrey indices and the constants ``h`` and ``r`` of a seminorm.

    ``s`` and ``sigma`` are the isotropic indices.  The optional quadruple
    ``(s1, s2, sigma1, sigma2)`` is used by the (h, r)-norm on a split
    variable ``(x1, x2)``; when absent, ``s`` and ``sigma`` serve both blocks.
    """

    s: float
    sigma: float
    h: float = 1.0
    r: float = 0.0
    s1: float | None = None
    s2: float | None = None
    sigma1: float | None = None
    sigma2: float | None = None

    def __post_init__(self):
        if self.s <= 0 or self.sigma <= 0:
            raise ValueError("s and sigma must be positive")
        if self.h <= 0:
            raise ValueError("h must be positive")
        quad = (self.s1, self.s2, self.sigma1, self.sigma2)
        if any(q is not None for q in quad) and any(q is None or q <= 0 for q in quad):
            raise ValueError("anisotropic indices must be given as four positive numbers")

    @property
    def nontrivial(self) -> bool:
        """Whether ``s + sigma >= 1``, the condition for a nonzero space."""
        return self.s + self.sigma >= 1.0 - 1e-15

    @property
    def is_half_half(self) -> bool:
        """Flag for ``(1/2, 1/2)``, which the Beurling-type statements exclude."""
        return abs(self.s - 0.5) < 1e-15 and abs(self.sigma - 0.5) < 1e-15

    def require_space(self) -> None:
        if not self.nontrivial:
            raise ValueError(f"s + sigma = {self.s + self.sigma} < 1 gives the zero space")

    def quadruple(self) -> tuple[float, float, float, float]:
        if self.s1 is None:
            return (self.s, self.s, self.sigma, self.sigma)
        return (self.s1, self.s2, self.sigma1, self.sigma2)


def log_factorial(k) -> float:
    return float(sum(lgamma(int(v) + 1) for v in np.atleast_1d(k)))


def multi_indices(d: int, max_order: int):
    """Multi-indices of length ``d`` with ``|a| <= max_order`` in graded-lex order."""
    out = []
    for order in range(max_order + 1):
        block = [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) == order]
        out.extend(sorted(block, reverse=True))
    return out


def interior_mask(grid: Grid, frac: float = INTERIOR) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for a, X in enumerate(grid.mesh()):
        mask &= np.abs(X) <= frac * grid.L[a]
    return mask


def gaussian_window(grid: Grid) -> SampledFunction:
    """``pi^(-d/4) exp(-|x|^2 / 2)``, unit norm in L^2."""
    r2 = sum(X ** 2 for X in grid.mesh())
    return SampledFunction(grid, pi ** (-grid.d / 4) * np.exp(-r2 / 2), "gaussian")


def hermite_1d(k: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite function of degree ``k`` by three-term recurrence."""
    if k < 0 or k > HERMITE_MAX:
        raise ValueError(f"Hermite degree must be in [0, {HERMITE_MAX}], got {k}")
    prev = np.zeros_like(x, dtype=float)
    cur = pi ** -0.25 * np.exp(-x ** 2 / 2)
    for j in range(k):
        prev, cur = cur, np.sqrt(2.0 / (j + 1)) * x * cur - np.sqrt(j / (j + 1)) * prev
    return cur


def hermite(k, grid: Grid) -> SampledFunction:
    """Tensor Hermite function; ``k`` is an int (d = 1) or one degree per axis."""
    ks = (int(k),) if np.isscalar(k) else tuple(int(v) for v in k)
    if len(ks) == 1 and grid.d > 1:
        ks = ks + (0,) * (grid.d - 1)
    if len(ks) != grid.d:
        raise ValueError("need one Hermite degree per axis")
    vals = np.ones(grid.shape)
    for X, kk in zip(grid.mesh(), ks):
        vals = vals * hermite_1d(kk, X)
    return SampledFunction(grid, vals, f"hermite:{','.join(map(str, ks))}")


@dataclass
class SeminormReport:
    """Normalized sup table over multi-indices ``(alpha, beta)``."""

    params: GevreyParams
    cutoff: int
    entries: list = field(default_factory=list)
    overall: float = 0.0
    argmax: dict = field(default_factory=dict)

    def value(self, alpha, beta) -> float:
        for a, b, v in self.entries:
            if tuple(a) == tuple(alpha) and tuple(b) == tuple(beta):
                return v
        raise KeyError((alpha, beta))

    def by_order(self) -> dict:
        """Max entry for each total order ``|alpha| + |beta|``."""
        out: dict = {}
        for a, b, v in self.entries:
            k = sum(a) + sum(b)
            out[k] = max(out.get(k, 0.0), v)
        return out

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "cutoff": self.cutoff,
            "entries": [[sum(a), sum(b), v] for a, b, v in self.entries],
            "overall": self.overall,
            "argmax": self.argmax,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_cutoff(cutoff: int) -> None:
    if cutoff < 0 or cutoff > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"cutoff {cutoff} outside [0, {MAX_DERIVATIVE_ORDER}]")


def gs_seminorm(f: SampledFunction, params: GevreyParams, cutoff: int) -> SeminormReport:
    """Table of ``sup |x^a d^b f| / (h^(|a|+|b|) a!^s b!^sigma)`` for ``|a|, |b| <= cutoff``."""
    _check_cutoff(cutoff)
    g = f.grid
    mask = interior_mask(g)
    mesh = [X[mask] for X in g.mesh()]
    idx = multi_indices(g.d, cutoff)
    report = SeminormReport(params, cutoff)
    best = -1.0
    with np.errstate(divide="ignore"):
        logabs_x = [np.log(np.abs(X)) for X in mesh]
        for beta in idx:
            db = np.abs(spectral_derivative(f, beta).values[mask])
            log_db = np.log(db)
            for alpha in idx:
                logv = log_db + sum(a * lx for a, lx in zip(alpha, logabs_x) if a)
                norm = ((sum(alpha) + sum(beta)) * log(params.h)
                        + params.s * log_factorial(alpha) + params.sigma * log_factorial(beta))
                k = int(np.argmax(logv))
                val = float(np.exp(logv[k] - norm)) if np.isfinite(logv[k]) else 0.0
                report.entries.append((tuple(alpha), tuple(beta), val))
                if val > best:
                    best = val
                    report.argmax = {"alpha": list(alpha), "beta": list(beta),
                                     "x": [float(X[k]) for X in mesh]}
    report.overall = max(best, 0.0)
    return report


def hr_norm(f: SampledFunction, params: GevreyParams, cutoff: int) -> float:
    """(h, r)-norm on a two-block variable ``(x1, x2)`` of a 2-axis grid.

    Computes the max over ``|a1| + |a2| <= cutoff`` of
    ``|d1^a1 d2^a2 f| / (h^(a1+a2) a1!^sigma1 a2!^sigma2 exp(r(|x1|^(1/s1) + |x2|^(1/s2))))``.
    """
    _check_cutoff(cutoff)
    g = f.grid
    if g.d != 2:
        raise ValueError("hr_norm expects a grid with two axes (x1, x2)")
    s1, s2, sg1, sg2 = params.quadruple()
    mask = interior_mask(g)
    X1, X2 = (X[mask] for X in g.mesh())
    log_w = params.r * (np.abs(X1) ** (1 / s1) + np.abs(X2) ** (1 / s2))
    best = 0.0
    with np.errstate(divide="ignore"):
        for a1, a2 in multi_indices(2, cutoff):
            der = np.abs(spectral_derivative(f, (a1, a2)).values[mask])
            logv = np.log(der) - log_w
            norm = (a1 + a2) * log(params.h) + sg1 * lgamma(a1 + 1) + sg2 * lgamma(a2 + 1)
            m = float(np.max(logv))
            if np.isfinite(m):
                best = max(best, float(np.exp(m - norm)))
    return best


def bounded_family_check(f: SampledFunction, params: GevreyParams, cutoff: int,
                         with_derivatives: bool = False) -> dict:
    """Uniform seminorm bound for the normalized moment family of ``f``.

    Members are ``x^g f / ((2^(1+s) h)^|g| g!^s)`` for ``|g| <= cutoff``, or
    with ``with_derivatives`` also ``D^e`` applied and normalization
    ``(2^(2+2s) h)^|g+e| g!^s e!^sigma``.  Each member is measured at the
    enlarged constant.  Returns the base seminorm, the per-member seminorms
    and their max.
    """
    s, sigma, h1 = params.s, params.sigma, params.h
    base = gs_seminorm(f, params, cutoff).overall
    factor = 2 ** (2 + 2 * s) if with_derivatives else 2 ** (1 + s)
    p2 = GevreyParams(s, sigma, h=factor * h1, r=params.r)
    g = f.grid
    mesh = g.mesh()
    values = []
    idx = multi_indices(g.d, cutoff)
    pairs = [(gm, e) for gm in idx for e in (idx if with_derivatives else [(0,) * g.d])]
    for gm, e in pairs:
        mono = np.ones(g.shape)
        for X, k in zip(mesh, gm):
            mono = mono * X ** k
        member = f.with_values(mono * f.values)
        if any(e):
            member = spectral_derivative(member, e)
            member = member.with_values((-1j) ** sum(e) * member.values)
        lognorm = ((sum(gm) + sum(e)) * log(factor * h1)
                   + s * log_factorial(gm) + sigma * log_factorial(e))
        member = member.with_values(member.values * np.exp(-lognorm))
        values.append(gs_seminorm(member, p2, cutoff).overall)
    return {"base": base, "members": values, "max_member": max(values),
            "enlarged_h": p2.h}
