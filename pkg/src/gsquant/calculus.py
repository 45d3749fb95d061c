"""Change of quantization, twisted products, kernel algebra, trace and mollifier.

Sign convention: ``D = -i d``.  With the forward transform
``(2 pi)^(-1/2) int g(x) exp(-i x eta) dx`` the operator ``D_x`` becomes
multiplication by ``eta``, so ``exp(i <A D_xi, D_x>)`` acts on a symbol
``a(x, xi)`` as the multiplier ``exp(i <A eta, y>)`` where ``eta`` is dual to
``x`` and ``y`` is dual to ``xi``.  On ``a = x xi`` this gives
``x xi - i t`` for ``A = t``.

The same convention gives the product
``a1 #_0 a2 = exp(i <D_xi1, D_x2>) (a1(x1, xi1) a2(x2, xi2))`` on the diagonal,
realized as the multiplier ``exp(i <y1, eta2>)`` with ``y1`` dual to ``xi1``
and ``eta2`` dual to ``x2``.

Four-slot product fields use the axis order ``(x1, x2, xi1, xi2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb, lgamma, log, pi

import numpy as np
from scipy.special import erf

from .grid import Grid, SampledFunction, centered_transform, spectral_derivative
from .quantize import (OperatorKernel, apply_op, as_matrix, base_of_symbol, kernel_from_symbol,
                       symbol_from_kernel)
from .stft import shifted_windows, stft
from .windows import GevreyParams, hr_norm, interior_mask, multi_indices

MAX_4D_POINTS = 1 << 24


def _pair_phase(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[:, None] * v[None, :]


def quant_transfer(a: SampledFunction, A) -> SampledFunction:
    """``exp(i <A D_xi, D_x>) a`` via the multiplier ``exp(i <A eta, y>)``."""
    base = base_of_symbol(a)
    d = base.d
    A = as_matrix(A, d)
    if not np.any(A.A):
        return a
    g = a.grid
    hat = centered_transform(a.values, g.n, g.L, range(2 * d), -1)
    dual = g.dual()
    meshes = dual.mesh()
    eta, y = meshes[:d], meshes[d:]
    phase = np.zeros(g.shape)
    for p in range(d):
        Aeta = sum(A.A[p, q] * eta[q] for q in range(d))
        phase = phase + Aeta * y[p]
    hat = hat * np.exp(1j * phase)
    vals = centered_transform(hat, dual.n, dual.L, range(2 * d), 1)
    return SampledFunction(g, vals, a.label)


def transfer_symbol(a: SampledFunction, A, B) -> SampledFunction:
    """``b`` with ``Op_B(b) = Op_A(a)``, namely ``exp(i <(A - B) D_xi, D_x>) a``."""
    base = base_of_symbol(a)
    A, B = as_matrix(A, base.d), as_matrix(B, base.d)
    return quant_transfer(a, A.A - B.A)


def fourier_shift(values: np.ndarray, grid: Grid, axis: int, offset: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation ``v(u - offset)`` along ``axis``.

    ``offset`` broadcasts against ``values``; the phase is applied in the
    transformed variable so the shift is exact for grid-band-limited data.
    """
    n, L = grid.n[axis], grid.L[axis]
    hat = centered_transform(values, [n], [L], [axis], -1)
    zeta = grid.dual_nodes(axis)
    shape = [1] * values.ndim
    shape[axis] = n
    hat = hat * np.exp(-1j * zeta.reshape(shape) * offset)
    dual = grid.sub([axis]).dual()
    return centered_transform(hat, dual.n, dual.L, [axis], 1)


@dataclass
class CheckReport:
    check: str
    max_dev: float
    tolerance: float
    detail: dict

    @property
    def passed(self) -> bool:
        return bool(self.max_dev <= self.tolerance)

    def to_dict(self) -> dict:
        return {"check": self.check, "max_dev": float(self.max_dev),
                "tolerance": self.tolerance, "pass": self.passed, **self.detail}


def _guard_4d(base: Grid) -> None:
    if base.d != 1:
        raise ValueError("four-slot fields are implemented for d = 1 only")
    if base.size ** 4 > MAX_4D_POINTS:
        raise MemoryError(f"a 4d field with n={base.n[0]} exceeds the memory ceiling")


def stft_covariance_check(a: SampledFunction, phi: SampledFunction, A,
                          tolerance: float = 1e-7) -> CheckReport:
    """Compare ``|V_{phi_A}(T_A a)(x, xi, eta, y)|`` with ``|V_phi a(x + A y, xi + A eta, eta, y)|``.

    ``T_A = exp(i <A D_xi, D_x>)`` and ``phi_A = T_A phi``.  With the
    multiplier ``exp(i <A eta, y>)`` the quadratic phase splits as
    ``q(Z) = q(W) + <grad q(W), Z - W> + q(Z - W)``; the last term is absorbed
    by ``phi_A`` and the middle one translates the position slots by
    ``grad q = (A^T y, A eta)``.  Off-node shifts use :func:`fourier_shift`.
    The deviation is the max over the interior.
    """
    base = base_of_symbol(a)
    _guard_4d(base)
    t = float(as_matrix(A, 1).A[0, 0])
    lhs = np.abs(stft(quant_transfer(a, t), quant_transfer(phi, t)).values)
    V = stft(a, phi)
    _, _, ETA, Y = V.meshes()
    g4 = V.grid
    shifted = V.values
    if t != 0:
        shifted = fourier_shift(shifted, g4, 0, -t * Y)
        shifted = fourier_shift(shifted, g4, 1, -t * ETA)
    rhs = np.abs(shifted)
    mask = interior_mask(g4)
    dev = float(np.max(np.abs(lhs - rhs)[mask]))
    return CheckReport("covariance", dev, tolerance, {"t": t, "n": base.n[0],
                                                      "field_max": float(rhs.max())})


def stft_at(a: SampledFunction, phi: SampledFunction, X: np.ndarray, XI: np.ndarray) -> np.ndarray:
    """``V_phi a`` at arbitrary points ``X`` (shifts) and ``XI`` (frequencies).

    ``X`` and ``XI`` have shape ``(P, D)``.  Window shifts by off-node amounts
    use trigonometric interpolation of ``phi``; the frequency sum is direct.
    """
    g = a.grid
    D = g.d
    X = np.atleast_2d(X)
    XI = np.atleast_2d(XI)
    dx = np.array(g.dx)
    lo = -np.array(g.L)
    k = np.floor((X - lo) / dx + 1e-9).astype(int)
    frac = X - (lo + k * dx)
    out = np.empty(X.shape[0], dtype=complex)
    nodes = [g.nodes(ax) for ax in range(D)]
    keys = {}
    for p, fr in enumerate(frac):
        keys.setdefault(tuple(np.round(fr, 12)), []).append(p)
    W_all = None
    for fr, idx in keys.items():
        w = phi.values
        for ax in range(D):
            if fr[ax] != 0:
                w = fourier_shift(w, g, ax, fr[ax])
        W_all = shifted_windows(phi.with_values(w))
        for p in idx:
            m = tuple(int(v) % g.n[ax] for ax, v in enumerate(k[p]))
            win = np.conj(W_all[m])
            expo = np.ones(g.shape, dtype=complex)
            for ax in range(D):
                sh = [1] * D
                sh[ax] = g.n[ax]
                expo = expo * np.exp(-1j * nodes[ax] * XI[p, ax]).reshape(sh)
            out[p] = np.sum(a.values * win * expo) * g.cell * (2 * pi) ** (-D / 2)
    return out


def stft_kernel_relation_check(a: SampledFunction, phi: SampledFunction, A, step: int = 4,
                               tolerance: float = 1e-7) -> CheckReport:
    """Both sides of the STFT relation between a symbol and its kernel on a sublattice.

    Left: ``V_psi K(x, y, xi, eta)`` with ``K`` the kernel of ``Op_A(a)`` and
    ``psi`` the kernel of ``Op_A(phi)``.  Right:
    ``(2 pi)^(-d) exp(i (x - y)(eta - A(xi + eta))) V_phi a(x - A(x - y), -eta + A(xi + eta), xi + eta, y - x)``.
    Sublattice points are every ``step``-th node on each axis, restricted to
    the interior on both sides; right-hand frequencies at the Nyquist edge
    alias on the grid.
    """
    base = base_of_symbol(a)
    _guard_4d(base)
    t = float(as_matrix(A, 1).A[0, 0])
    K = kernel_from_symbol(a, t).K
    psi = kernel_from_symbol(phi, t).K
    VK = stft(K, psi)
    g4 = VK.grid
    sel = [np.arange(0, m, step) for m in g4.n]
    xs, ys = base.nodes(0)[sel[0]], base.nodes(0)[sel[1]]
    xis, etas = base.dual_nodes(0)[sel[2]], base.dual_nodes(0)[sel[3]]
    Xg, Yg, XIg, ETAg = np.meshgrid(xs, ys, xis, etas, indexing="ij")
    lhs = VK.values[np.ix_(*sel)]
    p1 = Xg - t * (Xg - Yg)
    p2 = -ETAg + t * (XIg + ETAg)
    f1 = XIg + ETAg
    f2 = Yg - Xg
    sg = a.grid
    inside = ((np.abs(Xg) <= 0.9 * base.L[0]) & (np.abs(Yg) <= 0.9 * base.L[0])
              & (np.abs(XIg) <= 0.9 * sg.L[1]) & (np.abs(ETAg) <= 0.9 * sg.L[1])
              & (np.abs(p1) <= 0.9 * sg.L[0]) & (np.abs(p2) <= 0.9 * sg.L[1])
              & (np.abs(f1) <= 0.9 * sg.L[1]) & (np.abs(f2) <= 0.9 * sg.L[0]))
    P = np.column_stack([p1[inside], p2[inside]])
    F = np.column_stack([f1[inside], f2[inside]])
    Va = stft_at(a, phi, P, F)
    phase = np.exp(1j * (Xg - Yg)[inside] * (ETAg - t * (XIg + ETAg))[inside])
    rhs = (2 * pi) ** (-base.d) * phase * Va
    dev = float(np.max(np.abs(lhs[inside] - rhs))) if rhs.size else 0.0
    return CheckReport("stft-kernel", dev, tolerance,
                       {"t": t, "points": int(inside.sum()),
                        "field_max": float(np.abs(lhs).max())})


@dataclass(frozen=True)
class FourDField:
    """Values over ``(x1, x2, xi1, xi2)`` with both symbols on the same grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        g = self.grid
        if g.d != 4:
            raise ValueError("a four-slot field needs four axes")
        if not (g.sub([0]).same_as(g.sub([1])) and g.sub([2]).same_as(g.sub([3]))):
            raise ValueError("position axes and frequency axes must each share one grid")
        v = np.asarray(self.values, dtype=complex).reshape(g.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def symbol_grid(self) -> Grid:
        return Grid((self.grid.n[0], self.grid.n[2]), (self.grid.L[0], self.grid.L[2]))

    @classmethod
    def tensor(cls, a1: SampledFunction, a2: SampledFunction) -> "FourDField":
        """``F(x1, x2, xi1, xi2) = a1(x1, xi1) a2(x2, xi2)``."""
        if not a1.grid.same_as(a2.grid) or a1.grid.d != 2:
            raise ValueError("tensor needs two symbols on one two-axis grid")
        g = a1.grid
        grid = Grid((g.n[0], g.n[0], g.n[1], g.n[1]), (g.L[0], g.L[0], g.L[1], g.L[1]))
        vals = a1.values[:, None, :, None] * a2.values[None, :, None, :]
        return cls(grid, vals)

    def swap(self) -> "FourDField":
        return FourDField(self.grid, np.transpose(self.values, (1, 0, 3, 2)))

    def as_sampled(self) -> SampledFunction:
        return SampledFunction(self.grid, self.values, "F")


def trace_map(F: FourDField) -> SampledFunction:
    """``(x, xi) -> F(x, x, xi, xi)`` by diagonal indexing."""
    n0, n2 = F.grid.n[0], F.grid.n[2]
    i = np.arange(n0)[:, None]
    j = np.arange(n2)[None, :]
    return SampledFunction(F.symbol_grid, F.values[i, i, j, j], "trace")


def compose_kernels(K1, K2) -> OperatorKernel:
    """``(K1 o K2)(x, y) = int K1(x, z) K2(z, y) dz``."""
    A1 = K1.K if isinstance(K1, OperatorKernel) else K1
    A2 = K2.K if isinstance(K2, OperatorKernel) else K2
    if not A1.grid.same_as(A2.grid):
        raise ValueError("kernels live on different grids")
    d = A1.grid.d // 2
    base = A1.grid.sub(range(d))
    n = base.size
    M = A1.values.reshape(n, n) @ A2.values.reshape(n, n) * base.cell
    return OperatorKernel(SampledFunction(A1.grid, M, "composed"))


def triple_compose(K1, K2, K3) -> OperatorKernel:
    """``(K1 o K2 o K3)(x, y) = <K2, T(x, y, .)>`` with ``T(x, y, z1, z2) = K1(x, z1) K3(z2, y)``.

    The pairing is the bilinear integral over ``(z1, z2)``, evaluated as one
    contraction rather than two pairwise compositions.
    """
    mats = []
    for K in (K1, K2, K3):
        S = K.K if isinstance(K, OperatorKernel) else K
        mats.append(S)
    g = mats[0].grid
    if not all(m.grid.same_as(g) for m in mats):
        raise ValueError("kernels live on different grids")
    d = g.d // 2
    base = g.sub(range(d))
    n = base.size
    k1, k2, k3 = (m.values.reshape(n, n) for m in mats)
    out = np.einsum("xa,ab,by->xy", k1, k2, k3, optimize=["einsum_path", (0, 1, 2)])
    return OperatorKernel(SampledFunction(g, out * base.cell ** 2, "triple"))


def sharp0(a1: SampledFunction, a2: SampledFunction, route: str = "kernel") -> SampledFunction:
    """Kohn-Nirenberg product ``a1 #_0 a2``.

    ``route='kernel'`` composes the kernels of ``Op_0(a1)`` and ``Op_0(a2)``
    and reads back the symbol.  ``route='multiplier'`` applies
    ``exp(i <y1, eta2>)`` to the tensor field and takes the trace.
    """
    if not a1.grid.same_as(a2.grid):
        raise ValueError("symbols live on different grids")
    base = base_of_symbol(a1)
    if route == "kernel":
        K = compose_kernels(kernel_from_symbol(a1, 0.0), kernel_from_symbol(a2, 0.0))
        out = symbol_from_kernel(K, 0.0)
        return out.with_values(out.values, "a1#a2")
    if route != "multiplier":
        raise ValueError(f"unknown route {route!r}")
    _guard_4d(base)
    F = FourDField.tensor(a1, a2)
    g = F.grid
    # xi1 (axis 2) -> y1, x2 (axis 1) -> eta2
    hat = centered_transform(F.values, [g.n[1], g.n[2]], [g.L[1], g.L[2]], [1, 2], -1)
    eta2 = g.dual_nodes(1)
    y1 = g.dual_nodes(2)
    hat = hat * np.exp(1j * _pair_phase(eta2, y1))[None, :, :, None]
    dual = g.sub([1, 2]).dual()
    vals = centered_transform(hat, dual.n, dual.L, [1, 2], 1)
    tr = trace_map(FourDField(g, vals))
    return tr.with_values(tr.values, "a1#a2")


def sharpA(a1: SampledFunction, a2: SampledFunction, A, route: str = "kernel") -> SampledFunction:
    """``a1 #_A a2 = T_{-A}((T_A a1) #_0 (T_A a2))`` with ``T_A = exp(i <A D_xi, D_x>)``.

    ``Op_A(a) = Op_0(T_A a)``, so the Kohn-Nirenberg symbols are ``T_A a_j``.
    """
    base = base_of_symbol(a1)
    A = as_matrix(A, base.d)
    b1 = quant_transfer(a1, A.A)
    b2 = quant_transfer(a2, A.A)
    return quant_transfer(sharp0(b1, b2, route), -A.A)


def homomorphism_check(a1: SampledFunction, a2: SampledFunction, A,
                       family: list[SampledFunction], route: str = "kernel",
                       tolerance: float = 1e-7) -> CheckReport:
    """``Op_A(a1 #_A a2) f`` against ``Op_A(a1) Op_A(a2) f`` over ``family``."""
    c = sharpA(a1, a2, A, route)
    dev = 0.0
    for f in family:
        lhs = apply_op(c, A, f, route="kernel").values
        rhs = apply_op(a1, A, apply_op(a2, A, f, route="kernel"), route="kernel").values
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    t = float(as_matrix(A, 1).A[0, 0]) if base_of_symbol(a1).d == 1 else None
    return CheckReport("sharp-hom", dev, tolerance, {"t": t, "members": len(family)})


TAPER_REACH = 4.5


def flat_top(u: np.ndarray, plateau: float, width: float, reach: float = TAPER_REACH) -> np.ndarray:
    """Smooth taper within ``erfc(reach)`` of 1 on ``|u| <= plateau``.

    ``(erf((u + P) / w) - erf((u - P) / w)) / 2`` with ``P = plateau + reach w``;
    the default reach keeps the plateau deviation below ``1e-10``.
    """
    P = plateau + reach * width
    return 0.5 * (erf((u + P) / width) - erf((u - P) / width))


def taper_geometry(grid: Grid, axis: int) -> tuple[float, float]:
    """Plateau ``L/8`` and the widest edge that reaches 0 inside ``0.9 L``."""
    L = grid.L[axis]
    plateau = L / 8
    return plateau, (0.9 * L - plateau) / (2 * TAPER_REACH)


def tapered_polynomial(grid: Grid, kind: str) -> SampledFunction:
    """``1``, ``x``, ``xi`` or ``x xi`` times a flat-top taper in both variables."""
    X, XI = grid.mesh()
    taper = np.ones(grid.shape)
    for ax, M in enumerate((X, XI)):
        taper = taper * flat_top(M, *taper_geometry(grid, ax))
    polys = {"1": np.ones_like(X), "x": X, "xi": XI, "xxi": X * XI}
    if kind not in polys:
        raise ValueError(f"unknown polynomial {kind!r}")
    return SampledFunction(grid, polys[kind] * taper, f"{kind}*taper")


def plateau_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    for ax, M in enumerate(grid.mesh()):
        mask &= np.abs(M) <= taper_geometry(grid, ax)[0]
    return mask


def mollify(a: SampledFunction, phi, eps: float) -> SampledFunction:
    """``a_eps = phi(eps .) a`` with ``phi(0) = 1``.

    ``phi`` is a callable on ``(x, xi)`` or a sampled symbol, which is then
    evaluated at the dilated nodes by trigonometric interpolation.  When the
    dilated window is 1 to rounding on the whole grid the input is returned
    unchanged and a warning is issued.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    X, XI = a.grid.mesh()
    if callable(phi):
        w = np.asarray(phi(eps * X, eps * XI), dtype=complex)
        at0 = complex(phi(np.zeros(1), np.zeros(1))[0])
    else:
        if not phi.grid.same_as(a.grid):
            raise ValueError("window and symbol grids differ")
        w = _trig_eval(phi, eps * a.grid.nodes(0), eps * a.grid.nodes(1))
        at0 = complex(_trig_eval(phi, np.zeros(1), np.zeros(1))[0, 0])
    if abs(at0 - 1) > 1e-12:
        raise ValueError(f"window must equal 1 at the origin, got {at0}")
    if np.max(np.abs(w - 1)) < 1e-15:
        warnings.warn("dilated window is flat to machine precision; returning the symbol",
                      RuntimeWarning, stacklevel=2)
        return a.with_values(a.values, a.label + ":flat")
    return a.with_values(w * a.values, f"{a.label}_eps")


def _trig_eval(f: SampledFunction, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of a two-axis sample at the tensor points ``p0 x p1``."""
    g = f.grid
    hat = centered_transform(f.values, g.n, g.L, range(2), -1)
    z0, z1 = g.dual_nodes(0), g.dual_nodes(1)
    E0 = np.exp(1j * _pair_phase(p0, z0))
    E1 = np.exp(1j * _pair_phase(p1, z1))
    dual = g.dual()
    return E0 @ hat @ E1.T * dual.cell / (2 * pi)


def hr_norm4(F: FourDField, params: GevreyParams, cutoff: int) -> float:
    """(h, r)-norm of a four-slot field with position axes weighted by ``s``.

    Derivatives in ``x1, x2`` carry ``alpha!^sigma`` and weight exponent
    ``1/s``; derivatives in ``xi1, xi2`` carry ``beta!^s`` and ``1/sigma``.
    """
    s, sigma = params.s, params.sigma
    g = F.grid
    mask = interior_mask(g)
    mesh = [M[mask] for M in g.mesh()]
    logw = params.r * (np.abs(mesh[0]) ** (1 / s) + np.abs(mesh[1]) ** (1 / s)
                       + np.abs(mesh[2]) ** (1 / sigma) + np.abs(mesh[3]) ** (1 / sigma))
    sf = F.as_sampled()
    best = 0.0
    with np.errstate(divide="ignore"):
        for mi in multi_indices(4, cutoff):
            der = np.abs(spectral_derivative(sf, mi).values[mask])
            m = float(np.max(np.log(der) - logw))
            norm = (sum(mi) * log(params.h)
                    + sigma * (lgamma(mi[0] + 1) + lgamma(mi[1] + 1))
                    + s * (lgamma(mi[2] + 1) + lgamma(mi[3] + 1)))
            if np.isfinite(m):
                best = max(best, float(np.exp(m - norm)))
    return best


def symbol_hr_params(params: GevreyParams) -> GevreyParams:
    """(h, r) quadruple for a symbol on ``(x, xi)``: weights ``(s, sigma)``, factorials ``(sigma, s)``."""
    return GevreyParams(params.s, params.sigma, h=params.h, r=params.r,
                        s1=params.s, s2=params.sigma, sigma1=params.sigma, sigma2=params.s)


def trace_leibniz_check(F: FourDField, params: GevreyParams, cutoff: int = 4) -> dict:
    """Bound ``||trace F||_(2h, 2r) <= ||F||_(h, r)`` from the Leibniz rule at a finite cutoff.

    Each derivative of the trace is a sum over ``C(a, g) C(b, e)`` terms, and
    ``(a-g)! g! <= a!`` turns the binomial sum into ``2^(|a|+|b|)``; the
    diagonal doubles the weight exponent.
    """
    rhs = hr_norm4(F, params, cutoff)
    doubled = GevreyParams(params.s, params.sigma, h=2 * params.h, r=2 * params.r)
    lhs = hr_norm(trace_map(F), symbol_hr_params(doubled), cutoff)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs * (1 + 1e-9)),
            "binomial_total": sum(comb(cutoff, k) for k in range(cutoff + 1))}
