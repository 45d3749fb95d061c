"""Centered uniform grids and unitary discrete Fourier transforms.

Nodes on each axis are ``x_k = -L + 2 L k / n`` and the dual nodes are
``xi_j = -pi n / (2 L) + j pi / L``.  With ``dx * dxi * n = 2 pi`` the
continuous transform ``(2 pi)^(-1/2) * int f(x) exp(-i x xi) dx`` sampled on
these nodes factors as::

    F(xi_j) = dx / sqrt(2 pi) * (-1)^(n/2) * (-1)^j * DFT[(-1)^k f(x_k)]_j

so the centering is handled by sign flips instead of an fftshift copy.  The
dual grid of a grid with half-width ``L`` is again a centered grid with
half-width ``pi n / (2 L)``, which makes the inverse the same formula with
conjugated exponentials.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from math import pi, prod
from typing import Sequence

import numpy as np
import scipy.fft as sfft

MAX_DERIVATIVE_ORDER = 12


def fft_workers() -> int | None:
    """Thread cap for multi-axis FFTs, read from ``GSQ_THREADS``."""
    raw = os.environ.get("GSQ_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GSQ_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"GSQ_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class Grid:
    """Tensor grid on the centered box ``[-L, L)`` per axis.

    Attributes
    ----------
    n : tuple of int
        Even number of nodes per axis.
    L : tuple of float
        Half-width per axis.
    """

    n: tuple[int, ...]
    L: tuple[float, ...]

    def __post_init__(self):
        if len(self.n) != len(self.L) or len(self.n) == 0:
            raise ValueError("n and L must be nonempty and of equal length")
        for m in self.n:
            if int(m) != m or m < 2 or m % 2:
                raise ValueError(f"points per axis must be even and >= 2, got {m}")
        for h in self.L:
            if not np.isfinite(h) or h <= 0:
                raise ValueError(f"half-width must be positive, got {h}")

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def size(self) -> int:
        return prod(self.n)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(2.0 * h / m for m, h in zip(self.n, self.L))

    @property
    def dxi(self) -> tuple[float, ...]:
        return tuple(pi / h for h in self.L)

    @property
    def cell(self) -> float:
        """Volume element ``prod(dx)``."""
        return float(prod(self.dx))

    def nodes(self, axis: int = 0) -> np.ndarray:
        m, h = self.n[axis], self.L[axis]
        return -h + 2.0 * h * np.arange(m) / m

    def dual_nodes(self, axis: int = 0) -> np.ndarray:
        m, h = self.n[axis], self.L[axis]
        return -pi * m / (2.0 * h) + np.arange(m) * pi / h

    def dual(self) -> "Grid":
        """The frequency grid, itself a centered grid."""
        return Grid(self.n, tuple(pi * m / (2.0 * h) for m, h in zip(self.n, self.L)))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*[self.nodes(a) for a in range(self.d)], indexing="ij")

    def dual_mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*[self.dual_nodes(a) for a in range(self.d)], indexing="ij")

    def product(self, other: "Grid") -> "Grid":
        return Grid(self.n + other.n, self.L + other.L)

    def sub(self, axes: Sequence[int]) -> "Grid":
        return Grid(tuple(self.n[a] for a in axes), tuple(self.L[a] for a in axes))

    def replace_axes(self, axes: Sequence[int], other: "Grid") -> "Grid":
        n, L = list(self.n), list(self.L)
        for k, a in enumerate(axes):
            n[a], L[a] = other.n[k], other.L[k]
        return Grid(tuple(n), tuple(L))

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return self.n == other.n and np.allclose(self.L, other.L, rtol=rtol, atol=0)


def make_grid(d: int, n, L) -> Grid:
    """Build a ``d``-dimensional grid; scalar ``n`` or ``L`` are broadcast."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    ns = tuple(int(v) for v in np.broadcast_to(np.asarray(n), (d,)))
    if any(v != w for v, w in zip(np.broadcast_to(np.asarray(n), (d,)), ns)):
        raise ValueError("points per axis must be integers")
    Ls = tuple(float(v) for v in np.broadcast_to(np.asarray(L, dtype=float), (d,)))
    return Grid(ns, Ls)


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples on a :class:`Grid`, row-major in axis order."""

    grid: Grid
    values: np.ndarray
    label: str = field(default="")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, label: str | None = None) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.label if label is None else label)


def sample(grid: Grid, fn, label: str = "") -> SampledFunction:
    """Evaluate ``fn(*mesh)`` on the grid nodes."""
    return SampledFunction(grid, fn(*grid.mesh()), label)


def _axis_sign(m: int) -> np.ndarray:
    return 1.0 - 2.0 * (np.arange(m) % 2)


def centered_transform(values: np.ndarray, n: Sequence[int], L: Sequence[float],
                       axes: Sequence[int], sign: int, workers: int | None = None) -> np.ndarray:
    """Unitary transform of ``values`` along ``axes``.

    ``n`` and ``L`` describe the input grid on those axes; the output lives
    on its dual.

    ``sign=-1`` is the forward transform from position nodes to dual nodes,
    ``sign=+1`` the inverse from dual nodes back to position nodes.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    out = np.asarray(values, dtype=complex)
    if not np.all(np.isfinite(out)):
        raise ValueError("input contains NaN or Inf")
    if workers is None:
        workers = fft_workers()
    scale = 1.0
    for a, m, h in zip(axes, n, L):
        shape = [1] * out.ndim
        shape[a] = m
        flip = _axis_sign(m).reshape(shape)
        out = out * flip
        scale *= 2.0 * h / m / np.sqrt(2.0 * pi) * (-1.0) ** (m // 2)
    axes = tuple(axes)
    if sign == -1:
        out = sfft.fftn(out, axes=axes, workers=workers)
    else:
        out = sfft.ifftn(out, axes=axes, workers=workers, norm="forward")
    for a, m in zip(axes, n):
        shape = [1] * out.ndim
        shape[a] = m
        out *= _axis_sign(m).reshape(shape)
    return out * scale


def fourier(f: SampledFunction, sign: int = -1) -> SampledFunction:
    """Full unitary Fourier transform; ``sign=-1`` forward, ``+1`` inverse.

    The forward transform lands on ``f.grid.dual()``.  The inverse expects
    samples on a dual grid and returns them on its dual, the position grid.
    """
    return partial_fourier(f, tuple(range(f.grid.d)), sign)


def partial_fourier(F: SampledFunction, block: Sequence[int], sign: int = -1) -> SampledFunction:
    """Transform only along the axes in ``block``."""
    block = tuple(int(a) for a in block)
    if not block:
        raise ValueError("block of axes must be nonempty")
    if len(set(block)) != len(block) or any(a < 0 or a >= F.grid.d for a in block):
        raise ValueError(f"invalid axis block {block} for d={F.grid.d}")
    g = F.grid
    vals = centered_transform(F.values, [g.n[a] for a in block], [g.L[a] for a in block],
                              block, sign)
    new_grid = g.replace_axes(block, g.sub(block).dual())
    return SampledFunction(new_grid, vals, F.label)


def spectral_derivative(f: SampledFunction, alpha: Sequence[int],
                        max_order: int = MAX_DERIVATIVE_ORDER) -> SampledFunction:
    """``partial^alpha f`` via the multiplier ``(i xi)^alpha``.

    The Nyquist node is dropped for odd orders so that real input stays real.
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != f.grid.d or any(a < 0 for a in alpha):
        raise ValueError("multi-index must have one nonnegative entry per axis")
    if sum(alpha) > max_order:
        raise ValueError(f"derivative order {sum(alpha)} exceeds cap {max_order}")
    if sum(alpha) == 0:
        return f
    g = f.grid
    hat = centered_transform(f.values, g.n, g.L, range(g.d), -1)
    for a, k in enumerate(alpha):
        if k == 0:
            continue
        xi = g.dual_nodes(a)
        mult = (1j * xi) ** k
        if k % 2:
            mult[0] = 0.0
        shape = [1] * g.d
        shape[a] = g.n[a]
        hat = hat * mult.reshape(shape)
    dual = g.dual()
    vals = centered_transform(hat, dual.n, dual.L, range(g.d), 1)
    return SampledFunction(g, vals, f.label)


def quadrature(f: SampledFunction) -> complex:
    """``prod(dx) * sum(values)``; spectrally accurate for decaying integrands."""
    return complex(f.grid.cell * np.sum(f.values))
