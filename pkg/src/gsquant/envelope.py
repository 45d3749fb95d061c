"""Weights, the power-triangle constant, the m_{s,tau} series and envelope fits.

The fits turn STFT magnitudes into growth and decay rates.  A symbol field
``|V_Phi a(x, xi, eta, y)|`` is modelled as::

    log|V| ~ c + r_x |x|^(1/s) + r_xi |xi|^(1/sigma) - h_eta |eta|^(1/sigma) - h_y |y|^(1/s)

with position slots fitted as growth (``r``) and frequency slots as decay
(``h``, positive means decay).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from math import lgamma, log

import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar
from scipy.special import logsumexp

from .grid import SampledFunction
from .stft import STFTField, stft4

KINDS = ("decay_decay", "growth_decay", "growth_growth", "weighted")
NOISE_REL = 1e-14
MIN_POINTS = 10
LADDER_MARGIN = 0.05
GROWTH_TOL = 1e-2


def kappa(r: float) -> float:
    """``1`` for ``r <= 1`` and ``2^(r-1)`` above."""
    if not r > 0:
        raise ValueError(f"kappa needs r > 0, got {r}")
    return 1.0 if r <= 1 else 2.0 ** (r - 1)


def power_triangle_check(x, y, s, rtol: float = 1e-12):
    """Whether ``|x+y|^(1/s) <= kappa(1/s) (|x|^(1/s) + |y|^(1/s))``, elementwise."""
    x, y, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(s, float))
    if np.any(s <= 0):
        raise ValueError("s must be positive")
    p = 1.0 / s
    kap = np.where(p <= 1, 1.0, 2.0 ** (p - 1))
    lhs = np.abs(x + y) ** p
    rhs = kap * (np.abs(x) ** p + np.abs(y) ** p)
    ok = lhs <= rhs * (1 + rtol)
    return bool(ok) if ok.ndim == 0 else ok


def log_m_series(s: float, tau: float, x) -> np.ndarray:
    """``log m_s(tau <x>^2)`` with ``m_s(t) = sum_j t^j / (j!)^(2s)``.

    Terms are summed in the log domain until past the peak term and below
    ``1e-18`` of the partial sum.
    """
    if s <= 0 or tau <= 0:
        raise ValueError("s and tau must be positive")
    x = np.asarray(x, dtype=float)
    t = tau * (1.0 + x ** 2) if x.ndim <= 1 else tau * (1.0 + np.sum(x ** 2, axis=-1))
    t = np.atleast_1d(t)
    lt = np.log(t)
    J = 64
    while True:
        j = np.arange(J)
        logfac = np.array([lgamma(k + 1) for k in j])
        terms = lt[:, None] * j[None, :] - 2 * s * logfac[None, :]
        total = logsumexp(terms, axis=1)
        last = terms[:, -1]
        past_peak = terms[:, -1] < terms[:, -2]
        if np.all(past_peak & (last < total + log(1e-18))):
            break
        J *= 2
    out = total
    return out if np.ndim(x) > 0 else out[0]


def m_series(s: float, tau: float, x):
    """``m_{s,tau}(x)``; overflows to ``inf`` where the log exceeds float range."""
    with np.errstate(over="ignore"):
        return np.exp(log_m_series(s, tau, x))


@dataclass
class MBoundReport:
    s: float
    tau: float
    eps: float
    log_C: float
    lower_ok: bool
    upper_ok: bool
    x_max: float

    def to_dict(self) -> dict:
        return asdict(self)


def m_bounds_check(s: float, tau: float, x, eps: float = 0.1) -> MBoundReport:
    """Fit ``C`` in ``C^-1 e^((2s-eps)T) <= m <= C e^((2s+eps)T)``, ``T = tau^(1/2s) <x>^(1/s)``."""
    x = np.asarray(x, dtype=float)
    lm = log_m_series(s, tau, x)
    T = tau ** (1 / (2 * s)) * (1 + x ** 2) ** (1 / (2 * s))
    lower_gap = (2 * s - eps) * T - lm
    upper_gap = lm - (2 * s + eps) * T
    log_C = float(max(0.0, lower_gap.max(), upper_gap.max()))
    C_lo = lm >= (2 * s - eps) * T - log_C - 1e-12
    C_hi = lm <= (2 * s + eps) * T + log_C + 1e-12
    return MBoundReport(s, tau, eps, log_C, bool(C_lo.all()), bool(C_hi.all()), float(x.max()))


@dataclass
class QuotientReport:
    s: float
    tau: float
    r: float
    h0: float
    constants: list
    spread: float

    def to_dict(self) -> dict:
        return asdict(self)


def m_quotient_bound_check(s: float, tau: float, alpha_max: int, x, eps: float = 0.1) -> QuotientReport:
    """Constants ``sup_x x^a e^(r x^(1/s)) / m / (h0^a a!^s)`` for ``a <= alpha_max``.

    ``r`` is searched over ``(0, r_max]`` with ``r_max = (2s - eps) tau^(1/2s) / 2``
    and ``h0`` is tuned for each ``r``; the pair giving the most uniform
    constants is reported.  ``spread`` is the largest constant over the
    smallest.
    """
    if alpha_max < 0 or alpha_max > 60:
        raise ValueError("alpha_max must lie in [0, 60]")
    x = np.asarray(x, dtype=float)
    x = x[x > 0]
    lm = log_m_series(s, tau, x)
    logx = np.log(x)
    alphas = np.arange(alpha_max + 1)
    r_max = 0.5 * (2 * s - eps) * tau ** (1 / (2 * s))
    best = None
    for r in r_max * np.linspace(0.02, 1.0, 50):
        base = r * x ** (1 / s) - lm
        A = np.array([np.max(a * logx + base) - s * lgamma(a + 1) for a in alphas])
        u = s * log(s / r)
        if alpha_max > 0:
            res = minimize_scalar(lambda v: np.ptp(A - alphas * v), bounds=(u - 15, u + 15),
                                  method="bounded", options={"xatol": 1e-10})
            if res.fun < np.ptp(A - alphas * u):
                u = res.x
        spread = float(np.ptp(A - alphas * u))
        if best is None or spread < best[0]:
            best = (spread, r, u, A)
    spread, r, u, A = best
    consts = np.exp(A - alphas * u)
    return QuotientReport(s, tau, float(r), float(np.exp(u)), consts.tolist(), float(np.exp(spread)))


class Weight:
    """Weight ``omega(x, xi)``; products compose by multiplication."""

    def log(self, x, xi):
        raise NotImplementedError

    def __call__(self, x, xi):
        return np.exp(self.log(x, xi))

    def __mul__(self, other: "Weight") -> "Weight":
        return ProductWeight((self, other))


@dataclass(frozen=True)
class ExpWeight(Weight):
    """``omega_r = exp(r (|x|^(1/s) + |xi|^(1/sigma)))``."""

    r: float
    s: float
    sigma: float

    def log(self, x, xi):
        return self.r * (np.abs(x) ** (1 / self.s) + np.abs(xi) ** (1 / self.sigma))

    def __mul__(self, other):
        if isinstance(other, ExpWeight) and (other.s, other.sigma) == (self.s, self.sigma):
            return ExpWeight(self.r + other.r, self.s, self.sigma)
        return ProductWeight((self, other))


@dataclass(frozen=True)
class PolyWeight(Weight):
    """``<(x, xi)>^m``."""

    m: float

    def log(self, x, xi):
        return 0.5 * self.m * np.log1p(np.abs(x) ** 2 + np.abs(xi) ** 2)


@dataclass(frozen=True)
class ProductWeight(Weight):
    factors: tuple = field(default_factory=tuple)

    def log(self, x, xi):
        return sum(f.log(x, xi) for f in self.factors)


def weight_omega(kind: str, **params) -> Weight:
    """Built-in weights: ``exp`` (r, s, sigma), ``poly`` (m), ``product`` (factors)."""
    if kind == "exp":
        return ExpWeight(float(params["r"]), float(params.get("s", 1.0)),
                         float(params.get("sigma", 1.0)))
    if kind == "poly":
        return PolyWeight(float(params["m"]))
    if kind == "product":
        return ProductWeight(tuple(params["factors"]))
    raise ValueError(f"unknown weight kind {kind!r}")


@dataclass(frozen=True)
class EnvelopeModel:
    """Which slots grow, which decay, and the exponent ``e`` in ``|u|^(1/e)``.

    For two-slot fields the exponents are ``(s, sigma)`` on ``(x, xi)``; for
    four-slot fields ``(s, sigma, sigma, s)`` on ``(x, xi, eta, y)``.
    """

    kind: str
    s: float = 1.0
    sigma: float = 1.0
    weight: Weight | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.s <= 0 or self.sigma <= 0:
            raise ValueError("exponents must be positive")
        if self.kind == "weighted" and self.weight is None:
            raise ValueError("weighted model needs a weight")

    def slots(self, nslots: int) -> list[tuple[int, float, str]]:
        """``(axis, exponent, 'growth'|'decay')`` for each fitted slot."""
        if nslots == 2:
            exps = (self.s, self.sigma)
        elif nslots == 4:
            exps = (self.s, self.sigma, self.sigma, self.s)
        else:
            raise ValueError("fields must have 2 or 4 slots")
        half = nslots // 2
        roles = {
            "decay_decay": ["decay"] * nslots,
            "growth_growth": ["growth"] * nslots,
            "growth_decay": ["growth"] * half + ["decay"] * half,
            "weighted": [None] * half + ["decay"] * half,
        }[self.kind]
        return [(a, exps[a], role) for a, role in enumerate(roles) if role is not None]


@dataclass
class EnvelopeFit:
    model_kind: str
    rates: dict
    offset: float
    residual: float
    used_fraction: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_arrays(mag: np.ndarray, coords: list[np.ndarray], model: EnvelopeModel,
                names: list[str], noise_floor: float | None, region: np.ndarray | None,
                log_shift: np.ndarray | None = None) -> EnvelopeFit:
    slot_roles = model.slots(len(coords))
    peak = float(mag.max()) if mag.size else 0.0
    floor = NOISE_REL * peak if noise_floor is None else noise_floor
    if floor <= 0 and peak > 0:
        raise ValueError("noise floor must be positive")
    use = mag > floor if peak > 0 else np.zeros(mag.shape, bool)
    if region is not None:
        use &= region
    for a, _, _ in slot_roles:
        use &= coords[a] != 0
    npts = int(use.sum())
    if npts < MIN_POINTS:
        raise ValueError(f"only {npts} usable points; need at least {MIN_POINTS}")
    y = np.log(mag[use])
    if log_shift is not None:
        y = y - log_shift[use]
    cols, lo, hi = [], [], []
    for a, e, role in slot_roles:
        cols.append(np.abs(coords[a][use]) ** (1.0 / e))
        lo.append(-np.inf)
        hi.append(0.0 if role == "decay" else np.inf)
    cols.append(np.ones(npts))
    lo.append(-np.inf)
    hi.append(np.inf)
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ValueError("regressors are rank deficient on the usable points")
    # column scaling keeps the bounded solver well conditioned
    scale = np.linalg.norm(X, axis=0)
    res = lsq_linear(X / scale, y, bounds=(np.array(lo) * scale, np.array(hi) * scale),
                     method="bvls", tol=1e-15, lsmr_tol=None)
    beta = res.x / scale
    resid = y - X @ beta
    rates = {}
    for (a, e, role), b in zip(slot_roles, beta[:-1]):
        rates[names[a]] = float(-b) if role == "decay" else float(b)
    return EnvelopeFit(model.kind, rates, float(beta[-1]),
                       float(np.sqrt(np.mean(resid ** 2))), npts / mag.size, npts)


def _slot_names(n: int) -> list[str]:
    return list(("x", "xi") if n == 2 else ("x", "xi", "eta", "y"))


def field_coords(field: STFTField) -> list[np.ndarray]:
    return list(field.meshes())


def interior_region(field: STFTField, frac: float = 0.9) -> np.ndarray:
    g = field.grid
    mask = np.ones(g.shape, bool)
    for a, X in enumerate(g.mesh()):
        mask &= np.abs(X) <= frac * g.L[a]
    return mask


def fit_envelope(field, model: EnvelopeModel, noise_floor: float | None = None,
                 region: np.ndarray | None = None) -> EnvelopeFit:
    """Log-domain least squares of ``|field|`` against ``model``.

    ``field`` is an :class:`STFTField` or any object with ``grid`` and
    ``values`` (a :class:`~gsquant.grid.SampledFunction`).  The default
    ``noise_floor`` is ``1e-14 * max|field|`` and the default region is the
    interior ``|u| <= 0.9 L`` on every slot.
    """
    g = field.grid
    coords = list(g.mesh())
    mag = np.abs(field.values)
    if region is None:
        region = np.ones(g.shape, bool)
        for a, X in enumerate(coords):
            region &= np.abs(X) <= 0.9 * g.L[a]
    shift = None
    if model.kind == "weighted":
        half = len(coords) // 2
        if half != 2:
            raise ValueError("weighted model needs a four-slot field")
        shift = model.weight.log(coords[0], coords[1])
    return _fit_arrays(mag, coords, model, _slot_names(len(coords)), noise_floor, region, shift)


PATTERNS = {
    (False, False): "Gamma^{sigma,s}_{s,sigma}",
    (False, True): "Gamma^{sigma,s;0}_{s,sigma}",
    (True, False): "Gamma^{sigma,s}_{s,sigma;0}",
    (True, True): "Gamma^{sigma,s;0}_{s,sigma;0}",
}


@dataclass
class Verdict:
    """Finite-evidence class diagnosis of a symbol from its 4d STFT."""

    s: float
    sigma: float
    growth: dict
    decay: dict
    decay_ladder: list
    every_r: bool
    every_h: bool
    some_h: bool
    pattern: str | None
    consistent: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def table(self) -> str:
        rows = [f"{'slot':<6}{'role':<8}{'rate':>14}"]
        for k, v in self.growth.items():
            rows.append(f"{k:<6}{'growth':<8}{v:>14.6g}")
        for k, v in self.decay.items():
            rows.append(f"{k:<6}{'decay':<8}{v:>14.6g}")
        rows.append("decay ladder: " + ", ".join(f"{v:.4g}" for v in self.decay_ladder))
        rows.append(f"pattern: {self.pattern}")
        return "\n".join(rows)


def classify_field(field: STFTField, s: float, sigma: float,
                   noise_floor: float | None = None) -> Verdict:
    """Read growth rates in ``(x, xi)`` and decay rates in ``(eta, y)`` off a 4d field.

    Growth is fitted on the slice ``eta = y = 0``.  The field is then divided
    by the fitted growth envelope and maximized over ``(x, xi)``, and the
    result is fitted for decay in ``(eta, y)``.  "Every r" holds when no
    growth rate exceeds ``GROWTH_TOL``.  "Every h" is tested on nested
    frequency boxes at 1/4, 1/2 and all of the interior: the decay rate must
    rise by more than 5% from the inner box to the outer one, so no single
    ``h`` caps the decay.
    """
    if field.pos_grid.d != 2:
        raise ValueError("classification needs a field with slots (x, xi, eta, y)")
    pos, freq = field.pos_grid, field.freq_grid
    j_eta, j_y = freq.n[0] // 2, freq.n[1] // 2
    mag = np.abs(field.values)
    slice0 = SampledFunction(pos, mag[:, :, j_eta, j_y])
    gfit = fit_envelope(slice0, EnvelopeModel("growth_growth", s, sigma), noise_floor)
    growth = {"x": gfit.rates["x"], "xi": gfit.rates["xi"]}

    X, XI = pos.mesh()
    log_growth = gfit.offset + growth["x"] * np.abs(X) ** (1 / s) + growth["xi"] * np.abs(XI) ** (1 / sigma)
    pos_mask = np.ones(pos.shape, bool)
    for a, C in enumerate((X, XI)):
        pos_mask &= np.abs(C) <= 0.9 * pos.L[a]
    floor = NOISE_REL * mag.max() if noise_floor is None else noise_floor
    with np.errstate(divide="ignore"):
        logq = np.where(mag > floor, np.log(np.maximum(mag, floor)), -np.inf) - log_growth[:, :, None, None]
    env = np.exp(np.max(np.where(pos_mask[:, :, None, None], logq, -np.inf), axis=(0, 1)))
    env_field = SampledFunction(freq, env)
    decay_model = EnvelopeModel("decay_decay", sigma, s)
    dfit = fit_envelope(env_field, decay_model)
    decay = {"eta": dfit.rates["x"], "y": dfit.rates["xi"]}

    ETA, Y = freq.mesh()
    ladder = []
    for frac in (0.25, 0.5, 1.0):
        box = (np.abs(ETA) <= 0.9 * frac * freq.L[0]) & (np.abs(Y) <= 0.9 * frac * freq.L[1])
        try:
            sub = fit_envelope(env_field, decay_model, region=box)
            ladder.append(0.5 * (sub.rates["x"] + sub.rates["xi"]))
        except ValueError:
            ladder.append(float("nan"))
    finite = [v for v in ladder if np.isfinite(v)]
    every_r = max(growth.values()) <= GROWTH_TOL
    some_h = min(decay.values()) > 0
    every_h = some_h and len(finite) >= 2 and finite[-1] > (1 + LADDER_MARGIN) * finite[0]
    if some_h:
        pattern = PATTERNS[(every_r, every_h)]
        consistent = [PATTERNS[(er, eh)] for er in (False, True) for eh in (False, True)
                      if (not er or every_r) and (not eh or every_h)]
    else:
        pattern, consistent = None, []
    return Verdict(s, sigma, growth, decay, ladder, bool(every_r), bool(every_h),
                   bool(some_h), pattern, consistent)


def classify_symbol(a, Phi, s: float, sigma: float, noise_floor: float | None = None) -> Verdict:
    """Compute ``stft4(a, Phi)`` and classify it with :func:`classify_field`."""
    return classify_field(stft4(a, Phi), s, sigma, noise_floor)


def mixed_norm(field: STFTField, omega: Weight, R: float, q: float, s: float = 1.0,
               sigma: float = 1.0) -> float:
    """Discrete ``L^{inf,q}`` norm of ``|V| / omega_R``.

    ``omega_R(x, xi, eta, y) = omega(x, xi) exp(-R (|y|^(1/s) + |eta|^(1/sigma)))``.
    The sup runs over ``(x, xi)``, then an ``l^q`` quadrature over ``(eta, y)``.
    """
    if not (q >= 1):
        raise ValueError(f"q must lie in [1, inf], got {q}")
    if field.pos_grid.d != 2:
        raise ValueError("mixed_norm needs a field with slots (x, xi, eta, y)")
    X, XI, ETA, Y = field.meshes()
    mag = np.abs(field.values)
    log_quot = (np.log(mag, where=mag > 0, out=np.full(mag.shape, -np.inf))
                - omega.log(X, XI) + R * (np.abs(Y) ** (1 / s) + np.abs(ETA) ** (1 / sigma)))
    inner = np.exp(np.max(log_quot, axis=(0, 1)))
    if np.isinf(q):
        return float(inner.max())
    cell = float(np.prod(field.freq_grid.dx))
    return float((np.sum(inner ** q) * cell) ** (1 / q))
