"""Quantization ``Op_A(a)`` through kernels.

``Op_A(a) f(x) = (2 pi)^(-d) int int a(x - A(x-y), xi) f(y) exp(i (x-y) xi) dy dxi``.

Symbols live on ``base.product(base.dual())`` with axes ``(x, xi)``.
Kernels live on ``base.product(base)`` with axes ``(x, y)`` and are stored
with the factor that makes ``Op_A(a) f(x) = int K(x, y) f(y) dy``::

    K(x, y) = (2 pi)^(-d/2) (F_2^{-1} a)(x - A(x - y), x - y)

The shear is done column by column in ``u = x - y``: for each node ``u`` the
slice ``z -> b(z, u)`` is translated by ``A u`` with a Fourier phase, which is
exact for band-limited periodic data, and then ``(x, u)`` is re-indexed to
``(x, y)`` circularly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from .grid import Grid, SampledFunction, centered_transform, fourier

MAX_KERNEL_BYTES = 2 * 1024 ** 3


@dataclass(frozen=True)
class QuantMatrix:
    """Real ``d x d`` matrix ``A`` selecting the quantization."""

    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("quantization matrix must be square")
        if not np.all(np.isfinite(A)):
            raise ValueError("quantization matrix must be finite")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def scalar(cls, t: float, d: int = 1) -> "QuantMatrix":
        return cls(float(t) * np.eye(d))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def T(self) -> "QuantMatrix":
        return QuantMatrix(self.A.T)

    def __sub__(self, other: "QuantMatrix") -> "QuantMatrix":
        return QuantMatrix(self.A - as_matrix(other, self.d).A)


def as_matrix(A, d: int = 1) -> QuantMatrix:
    """Accept a :class:`QuantMatrix`, a scalar ``t`` or an array."""
    if isinstance(A, QuantMatrix):
        return A
    if np.isscalar(A):
        return QuantMatrix.scalar(A, d)
    return QuantMatrix(A)


@dataclass(frozen=True)
class OperatorKernel:
    """Kernel samples on the ``(x, y)`` grid with a note of where they came from."""

    K: SampledFunction
    symbol_label: str = ""
    A: np.ndarray | None = field(default=None)

    @property
    def base(self) -> Grid:
        d = self.K.grid.d // 2
        return self.K.grid.sub(range(d))


def symbol_grid(base: Grid) -> Grid:
    return base.product(base.dual())


def kernel_grid(base: Grid) -> Grid:
    return base.product(base)


def base_of_symbol(a: SampledFunction) -> Grid:
    g = a.grid
    if g.d % 2:
        raise ValueError("symbol grid must have an even number of axes")
    d = g.d // 2
    base = g.sub(range(d))
    if not g.sub(range(d, 2 * d)).same_as(base.dual()):
        raise ValueError("symbol frequency axes must be the dual of its position axes")
    return base


def _guard(base: Grid, A: QuantMatrix) -> None:
    if A.d != base.d:
        raise ValueError(f"matrix is {A.d}x{A.d} but the grid has d={base.d}")
    if np.linalg.norm(A.A, 2) > 1 + 1e-12:
        raise ValueError("shear offset |A u| would exceed the half-box; need ||A|| <= 1")
    if 16 * base.size ** 2 > MAX_KERNEL_BYTES:
        raise MemoryError("kernel array exceeds the configured memory ceiling")


def _diff_index(base: Grid):
    """Index arrays mapping ``(i, j)`` to the ``u``-node ``(i - j + n/2) mod n`` per axis."""
    d = base.d
    idx = []
    for a, n in enumerate(base.n):
        i = np.arange(n).reshape(-1, 1)
        k = np.arange(n).reshape(1, -1)
        v = (i - k + n // 2) % n
        shape = [1] * (2 * d)
        shape[a], shape[d + a] = n, n
        idx.append(v.reshape(shape))
    return idx


def _gather_second_block(arr: np.ndarray, base: Grid) -> np.ndarray:
    """``out[i, j] = arr[i, (i - j + n/2) mod n]``; the map is an involution."""
    d = base.d
    first = []
    for a, n in enumerate(base.n):
        shape = [1] * (2 * d)
        shape[a] = n
        first.append(np.arange(n).reshape(shape))
    return arr[tuple(first) + tuple(_diff_index(base))]


def _shear_phase(base: Grid, A: QuantMatrix, sign: int) -> np.ndarray:
    """``exp(-i sign zeta . (A u))`` over ``(zeta, u)``."""
    d = base.d
    dual = base.dual()
    zetas = np.meshgrid(*[dual.nodes(a) for a in range(d)], indexing="ij")
    us = np.meshgrid(*[base.nodes(a) for a in range(d)], indexing="ij")
    phase = np.zeros(base.shape + base.shape)
    for p in range(d):
        Au = sum(A.A[p, q] * us[q] for q in range(d))
        phase = phase + zetas[p][(...,) + (None,) * d] * Au[(None,) * d]
    return np.exp(-1j * sign * phase)


def _shift_first_block(b: np.ndarray, base: Grid, A: QuantMatrix, sign: int) -> np.ndarray:
    """``c(x, u) = b(x - sign * A u, u)`` by a phase in the transformed first block."""
    if not np.any(A.A):
        return b
    d = base.d
    B = centered_transform(b, base.n, base.L, range(d), -1)
    B = B * _shear_phase(base, A, sign)
    dual = base.dual()
    return centered_transform(B, dual.n, dual.L, range(d), 1)


def kernel_from_symbol(a: SampledFunction, A=0.0) -> OperatorKernel:
    """Kernel of ``Op_A(a)``; see the module docstring for the normalization."""
    base = base_of_symbol(a)
    A = as_matrix(A, base.d)
    _guard(base, A)
    d = base.d
    dual = base.dual()
    b = centered_transform(a.values, dual.n, dual.L, range(d, 2 * d), 1)
    c = _shift_first_block(b, base, A, +1)
    K = _gather_second_block(c, base) * (2 * pi) ** (-d / 2)
    return OperatorKernel(SampledFunction(kernel_grid(base), K, f"kernel[{a.label}]"),
                          a.label, A.A)


def symbol_from_kernel(K, A=0.0) -> SampledFunction:
    """Inverse of :func:`kernel_from_symbol`."""
    Ks = K.K if isinstance(K, OperatorKernel) else K
    g = Ks.grid
    if g.d % 2:
        raise ValueError("kernel grid must have an even number of axes")
    d = g.d // 2
    base = g.sub(range(d))
    if not g.sub(range(d, 2 * d)).same_as(base):
        raise ValueError("kernel grid must be a product of two copies of one grid")
    A = as_matrix(A, d)
    _guard(base, A)
    c = _gather_second_block(Ks.values * (2 * pi) ** (d / 2), base)
    b = _shift_first_block(c, base, A, -1)
    vals = centered_transform(b, base.n, base.L, range(d, 2 * d), -1)
    return SampledFunction(symbol_grid(base), vals, "symbol")


def apply_kernel(K, f: SampledFunction) -> SampledFunction:
    """``g(x) = int K(x, y) f(y) dy`` by quadrature."""
    Ks = K.K if isinstance(K, OperatorKernel) else K
    d = f.grid.d
    if Ks.grid.d != 2 * d or not Ks.grid.same_as(kernel_grid(f.grid)):
        raise ValueError("kernel grid does not match the function grid")
    n = f.grid.size
    g = Ks.values.reshape(n, n) @ f.values.reshape(n)
    return SampledFunction(f.grid, g.reshape(f.grid.shape) * f.grid.cell, "Op f")


def apply_op(a: SampledFunction, A, f: SampledFunction, route: str = "auto") -> SampledFunction:
    """``Op_A(a) f``.

    For ``A = 0`` the default route is the direct formula
    ``(2 pi)^(-d/2) int a(x, xi) f^(xi) exp(i x xi) dxi``; otherwise, or with
    ``route='kernel'``, the kernel is built and applied.
    """
    base = base_of_symbol(a)
    if not base.same_as(f.grid):
        raise ValueError("symbol and function grids do not match")
    A = as_matrix(A, base.d)
    if route not in ("auto", "direct", "kernel"):
        raise ValueError(f"unknown route {route!r}")
    direct = route == "direct" or (route == "auto" and not np.any(A.A))
    if route == "direct" and np.any(A.A):
        raise ValueError("the direct route exists only for A = 0")
    if not direct:
        return apply_kernel(kernel_from_symbol(a, A), f)
    d = base.d
    fh = fourier(f).values
    dual = base.dual()
    xs = base.mesh()
    xis = dual.mesh()
    # phase exp(i x . xi) over (x, xi)
    ph = np.zeros(base.shape + dual.shape)
    for p in range(d):
        ph = ph + xs[p][(...,) + (None,) * d] * xis[p][(None,) * d]
    integrand = a.values * np.exp(1j * ph) * fh[(None,) * d]
    vals = np.sum(integrand, axis=tuple(range(d, 2 * d))) * dual.cell * (2 * pi) ** (-d / 2)
    return SampledFunction(base, vals, "Op f")


def reference_apply(a_fn, A, f: SampledFunction) -> SampledFunction:
    """Direct double-integral oracle for decaying symbols, d = 1 and n <= 64.

    ``a_fn(x, xi)`` is evaluated off-grid at ``x - A (x - y)``.
    """
    g = f.grid
    if g.d != 1 or g.n[0] > 64:
        raise ValueError("reference oracle is limited to d = 1 and n <= 64")
    t = float(as_matrix(A, 1).A[0, 0])
    x = g.nodes(0)
    xi = g.dual_nodes(0)
    dx, dxi = g.dx[0], g.dxi[0]
    out = np.zeros(g.n[0], dtype=complex)
    for i, xv in enumerate(x):
        total = 0j
        for j, yv in enumerate(x):
            z = xv - t * (xv - yv)
            total += np.sum(a_fn(z, xi) * np.exp(1j * (xv - yv) * xi)) * f.values[j]
        out[i] = total * dx * dxi / (2 * pi)
    return SampledFunction(g, out, "reference Op f")


def operator_matrix(a: SampledFunction, A, basis: list[SampledFunction]) -> np.ndarray:
    """``M[j, k] = (Op_A(a) basis[k], basis[j])`` by quadrature."""
    K = kernel_from_symbol(a, A)
    cols = [apply_kernel(K, b).values.ravel() for b in basis]
    B = np.array([b.values.ravel() for b in basis])
    cell = basis[0].grid.cell
    return np.conj(B) @ np.array(cols).T * cell


@dataclass
class MappingReport:
    """Empirical probe of ``Op_A(a)`` on a family of test functions."""

    s: float
    sigma: float
    members: list
    all_finite: bool
    all_decay: bool

    def to_dict(self) -> dict:
        return {"s": self.s, "sigma": self.sigma, "members": self.members,
                "all_finite": self.all_finite, "all_decay": self.all_decay,
                "note": "finite-sample probe, not a proof of continuity"}


def verify_mapping(a: SampledFunction, A, params, family: list[SampledFunction] | None = None,
                   cutoff: int = 6) -> MappingReport:
    """Apply ``Op_A(a)`` to each member and compare seminorms and STFT decay fits.

    Decay rates come from a ``decay_decay`` fit of ``|V_phi g|`` with
    exponents ``(s, sigma)``; the seminorm is the sampled table at
    ``params.h``.
    """
    from .envelope import EnvelopeModel, fit_envelope
    from .stft import stft
    from .windows import gaussian_window, gs_seminorm, hermite

    base = base_of_symbol(a)
    if family is None:
        family = [hermite(k, base) for k in range(11)]
    phi = gaussian_window(base)
    model = EnvelopeModel("decay_decay", params.s, params.sigma)
    members = []
    for f in family:
        g = apply_op(a, A, f)
        fin = fit_envelope(stft(f, phi), model).rates
        try:
            fout = fit_envelope(stft(g, phi), model).rates
        except ValueError:
            fout = {k: float("inf") for k in fin}
        semi = gs_seminorm(g, params, cutoff).overall
        members.append({"label": f.label, "input_rates": fin, "output_rates": fout,
                        "seminorm": semi})
    return MappingReport(
        params.s, params.sigma, members,
        all(np.isfinite(m["seminorm"]) for m in members),
        all(min(m["output_rates"].values()) > 0 for m in members),
    )
