"""Short-time Fourier transform on centered grids.

``V_phi f(x, xi) = (2 pi)^(-d/2) int f(y) conj(phi(y - x)) exp(-i y xi) dy``.

Shifts by grid nodes are circular: ``phi(y_k - x_m)`` is ``phi`` at index
``(k - m + n/2) mod n``.  For inputs whose tails vanish at the box edge this
is exact, and on the grid both the inversion formula and the Moyal identity
hold to rounding because every step is a discrete Parseval identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid, SampledFunction, centered_transform, quadrature
from .io import from_bytes, to_bytes

SLOTS_2D = ("x", "xi")
SLOTS_4D = ("x", "xi", "eta", "y")


@dataclass(frozen=True)
class STFTField:
    """Samples of ``V_phi f`` over position nodes times dual frequency nodes.

    ``values`` has shape ``pos_grid.shape + freq_grid.shape``.  For a symbol
    on a two-axis grid the four axes are ``(x, xi, eta, y)`` with ``eta`` dual
    to ``x`` and ``y`` dual to ``xi``.
    """

    pos_grid: Grid
    freq_grid: Grid
    values: np.ndarray
    window_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        shape = self.pos_grid.shape + self.freq_grid.shape
        if v.size != int(np.prod(shape)):
            raise ValueError(f"expected {int(np.prod(shape))} values, got {v.size}")
        if not self.freq_grid.same_as(self.pos_grid.dual()):
            raise ValueError("frequency grid must be the dual of the position grid")
        v = v.reshape(shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def slots(self) -> tuple[str, ...]:
        if self.pos_grid.d == 1:
            return SLOTS_2D
        if self.pos_grid.d == 2:
            return SLOTS_4D
        return tuple(f"x{i}" for i in range(self.pos_grid.d)) + tuple(
            f"xi{i}" for i in range(self.pos_grid.d))

    @property
    def grid(self) -> Grid:
        """Product grid over all slots."""
        return self.pos_grid.product(self.freq_grid)

    def meshes(self) -> tuple[np.ndarray, ...]:
        return self.grid.mesh()

    def as_sampled(self) -> SampledFunction:
        return SampledFunction(self.grid, self.values, self.window_label)

    def sidecar(self) -> dict:
        return {
            "format": "GSQ1",
            "slot_order": list(self.slots),
            "window_label": self.window_label,
            "pos_grid": {"n": list(self.pos_grid.n), "L": list(self.pos_grid.L)},
            "freq_grid": {"n": list(self.freq_grid.n), "L": list(self.freq_grid.L)},
        }

    def save(self, path) -> tuple[Path, Path]:
        """Write ``path`` as GSQ1 and ``path + '.json'`` as the sidecar."""
        path = Path(path)
        side = path.with_name(path.name + ".json")
        path.write_bytes(to_bytes(self.as_sampled()))
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path) -> "STFTField":
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        full = from_bytes(path.read_bytes())
        d = full.grid.d // 2
        return cls(full.grid.sub(range(d)), full.grid.sub(range(d, 2 * d)),
                   full.values, meta.get("window_label", ""))


def _check_pair(f: SampledFunction, phi: SampledFunction) -> None:
    if not f.grid.same_as(phi.grid):
        raise ValueError("function and window must share a grid")


def shifted_windows(phi: SampledFunction) -> np.ndarray:
    """Array ``W[m..., k...] = phi(y_k - x_m)`` with circular shifts."""
    g = phi.grid
    d = g.d
    index = []
    for a, n in enumerate(g.n):
        m = np.arange(n).reshape(-1, 1)
        k = np.arange(n).reshape(1, -1)
        idx = (k - m + n // 2) % n
        shape = [1] * (2 * d)
        shape[a] = n
        shape[d + a] = n
        index.append(idx.reshape(shape))
    return phi.values[tuple(index)]


def stft(f: SampledFunction, phi: SampledFunction) -> STFTField:
    """``V_phi f`` at all (shift node, dual node) pairs."""
    _check_pair(f, phi)
    if not np.any(phi.values):
        raise ValueError("window must be nonzero")
    g = f.grid
    d = g.d
    prod = f.values[(None,) * d] * np.conj(shifted_windows(phi))
    vals = centered_transform(prod, g.n, g.L, range(d, 2 * d), -1)
    return STFTField(g, g.dual(), vals, phi.label)


def istft(F: STFTField, phi: SampledFunction) -> SampledFunction:
    """Quadrature of ``(2 pi)^(-d/2) |phi|^(-2) int V(y, eta) phi(x - y) exp(i x eta)``."""
    g = F.pos_grid
    if not g.same_as(phi.grid):
        raise ValueError("field and window grids differ")
    norm2 = quadrature(phi.with_values(np.abs(phi.values) ** 2)).real
    if norm2 == 0:
        raise ValueError("window must be nonzero")
    d = g.d
    fd = F.freq_grid
    local = centered_transform(F.values, fd.n, fd.L, range(d, 2 * d), 1)
    summed = np.sum(local * shifted_windows(phi), axis=tuple(range(d)))
    return SampledFunction(g, summed * g.cell / norm2, "istft")


def inner(f: SampledFunction, g: SampledFunction) -> complex:
    """``(f, g) = int f conj(g)`` by quadrature."""
    _check_pair(f, g)
    return quadrature(f.with_values(f.values * np.conj(g.values)))


def moyal_check(f: SampledFunction, g: SampledFunction, phi: SampledFunction,
                psi: SampledFunction) -> tuple[complex, complex]:
    """Both sides of ``(V_phi f, V_psi g) = (f, g) conj((phi, psi))``."""
    for u in (g, phi, psi):
        _check_pair(f, u)
    Vf, Vg = stft(f, phi), stft(g, psi)
    lhs = complex(np.sum(Vf.values * np.conj(Vg.values)) * Vf.grid.cell)
    rhs = inner(f, g) * np.conj(inner(phi, psi))
    return lhs, complex(rhs)


def stft4(a: SampledFunction, Phi: SampledFunction) -> STFTField:
    """STFT of a symbol on a two-axis ``(x, xi)`` grid; slots ``(x, xi, eta, y)``."""
    if a.grid.d != 2:
        raise ValueError("stft4 takes a symbol on a grid with exactly two axes")
    return stft(a, Phi)
