"""Command-line front end.

Precedence for every setting: built-in defaults, then the JSON file given by
``--config``, then explicit flags.  Exit codes: 0 pass, 1 check failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import calculus, envelope, io, quantize, windows
from .grid import Grid, SampledFunction, make_grid, sample
from .stft import STFTField, istft, moyal_check, stft, stft4

CHECKS = ("transfer", "sharp-hom", "stft-kernel", "covariance", "moyal", "inversion",
          "m-bounds", "kappa", "mixed-norm", "mollify", "trace")
CSV_MAX_ROWS = 1 << 16
DEFAULT_N = 32
# scale used by a check when neither the config nor a flag sets n or L
CHECK_SCALE = {"transfer": {"n": 128}, "inversion": {"n": 256, "L": 12.0}}


class ConfigError(Exception):
    """Invalid configuration or input; maps to exit code 2."""


@dataclass
class RunConfig:
    d: int = 1
    n: int | None = None
    L: float | None = None
    s: float = 1.0
    sigma: float = 1.0
    h_ladder: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    r_ladder: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    q: list = field(default_factory=lambda: [1.0, 2.0, "inf"])
    t: float = 0.5
    A: list | None = None
    window: str = "gaussian"
    memory_mb: float = 2048.0
    seed: int = 0
    out_dir: str = "."
    route: str = "kernel"
    tolerance: float | None = None
    n_given: bool = field(default=True, init=False, repr=False)

    def __post_init__(self):
        if self.n is None:
            self.n = DEFAULT_N
            self.n_given = False
        if not isinstance(self.n, int) or self.n < 2 or self.n % 2:
            raise ConfigError(f"n must be an even integer >= 2, got {self.n!r}")
        if self.d < 1:
            raise ConfigError("d must be at least 1")
        if self.L is not None and not self.L > 0:
            raise ConfigError("L must be positive")
        for name in ("h_ladder", "r_ladder"):
            lad = getattr(self, name)
            if not lad or any(not (float(v) > 0) for v in lad):
                raise ConfigError(f"{name} must be a nonempty list of positive numbers")
        if not self.q or any(self._q(v) < 1 for v in self.q):
            raise ConfigError("q values must lie in [1, inf]")
        if self.s <= 0 or self.sigma <= 0:
            raise ConfigError("s and sigma must be positive")
        if self.route not in ("kernel", "multiplier"):
            raise ConfigError(f"unknown route {self.route!r}")
        if self.memory_mb <= 0:
            raise ConfigError("memory_mb must be positive")

    @staticmethod
    def _q(v) -> float:
        return math.inf if v in ("inf", math.inf) else float(v)

    @property
    def q_values(self) -> list[float]:
        return [self._q(v) for v in self.q]

    @property
    def half_width(self) -> float:
        """``L``, defaulting to the self-dual value ``sqrt(pi n / 2)``."""
        return self.L if self.L is not None else math.sqrt(math.pi * self.n / 2)

    @property
    def matrix(self):
        if self.A is not None:
            return np.asarray(self.A, dtype=float)
        return self.t

    def base(self) -> Grid:
        return make_grid(self.d, self.n, self.half_width)

    def require_bytes(self, nbytes: float, what: str) -> None:
        if nbytes > self.memory_mb * 2 ** 20:
            raise ConfigError(f"{what} needs {nbytes / 2 ** 20:.0f} MB, above memory_mb="
                              f"{self.memory_mb:g}")


def load_config(path: str | None, overrides: dict) -> RunConfig:
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig) if f.init}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _parse_kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = float(v)
    return out


def builtin(name: str, cfg: RunConfig) -> SampledFunction:
    """Named inputs: ``gaussian``, ``hermite:k`` on the base grid; ``gauss2d`` and
    ``growth:r=..,s=..`` on the symbol grid."""
    base = cfg.base()
    if name == "gaussian":
        return windows.gaussian_window(base)
    if name.startswith("hermite:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad Hermite degree in {name!r}") from None
        return windows.hermite(k, base)
    sg = quantize.symbol_grid(_base_1d(cfg))
    if name == "gauss2d":
        return sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "gauss2d")
    if name.startswith("growth:"):
        kv = _parse_kv(name.split(":", 1)[1])
        r, s = kv.get("r", 0.5), kv.get("s", 2.0)
        return sample(sg, lambda x, xi: np.exp(r * (np.abs(x) ** (1 / s) + np.abs(xi) ** (1 / s))),
                      name)
    raise ConfigError(f"unknown builtin {name!r}")


def _base_1d(cfg: RunConfig) -> Grid:
    if cfg.d != 1:
        raise ConfigError("symbol builtins and four-slot checks need d = 1")
    return make_grid(1, cfg.n, cfg.half_width)


def load_input(source: str, cfg: RunConfig) -> SampledFunction:
    path = Path(source)
    if path.suffix == ".gsq" or path.exists() or "/" in source:
        try:
            return io.read_gsq1(path, label=path.stem)
        except FileNotFoundError:
            raise ConfigError(f"input file not found: {source}") from None
        except ValueError as exc:
            raise ConfigError(f"cannot read {source}: {exc}") from None
    return builtin(source, cfg)


def _window_for(f: SampledFunction, cfg: RunConfig) -> SampledFunction:
    if cfg.window == "gaussian":
        return windows.gaussian_window(f.grid)
    if cfg.window.startswith("hermite:"):
        return windows.hermite(int(cfg.window.split(":", 1)[1]), f.grid)
    raise ConfigError(f"unknown window {cfg.window!r}")


def _write_csv(field_: STFTField, path: Path) -> None:
    mag = np.abs(field_.values)
    meshes = field_.meshes()
    slots = list(field_.slots)
    d = field_.pos_grid.d
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if mag.size <= CSV_MAX_ROWS:
            w.writerow(slots + ["abs"])
            for idx in np.ndindex(mag.shape):
                w.writerow([f"{M[idx]:.12g}" for M in meshes] + [f"{mag[idx]:.12g}"])
        else:
            proj = mag.reshape(field_.pos_grid.shape + (-1,)).max(axis=-1)
            pos = field_.pos_grid.mesh()
            w.writerow(slots[:d] + ["max_abs_over_freq"])
            for idx in np.ndindex(proj.shape):
                w.writerow([f"{M[idx]:.12g}" for M in pos] + [f"{proj[idx]:.12g}"])


def _out_path(cfg: RunConfig, given: str | None, default: str) -> Path:
    path = Path(given) if given else Path(cfg.out_dir) / default
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def cmd_gen(cfg: RunConfig, args) -> int:
    f = builtin(args.name, cfg)
    path = _out_path(cfg, args.out, args.name.replace(":", "_").replace(",", "_") + ".gsq")
    io.write_gsq1(path, f)
    _emit({"wrote": str(path), "label": f.label, "n": list(f.grid.n), "L": list(f.grid.L)}, None)
    return 0


def cmd_stft(cfg: RunConfig, args) -> int:
    f = load_input(args.input, cfg)
    cfg.require_bytes(16.0 * f.grid.size ** 2 * 3, "stft")
    F = stft(f, _window_for(f, cfg))
    path = _out_path(cfg, args.out, "field.gsq")
    gsq, side = F.save(path)
    csv_path = path.with_name(path.name + ".csv")
    _write_csv(F, csv_path)
    _emit({"field": str(gsq), "sidecar": str(side), "csv": str(csv_path),
           "slots": list(F.slots)}, None)
    return 0


def cmd_quantize(cfg: RunConfig, args) -> int:
    a = load_input(args.symbol, cfg)
    f = load_input(args.input, cfg)
    g = quantize.apply_op(a, cfg.matrix, f)
    path = _out_path(cfg, args.out, "op.gsq")
    io.write_gsq1(path, g)
    _emit({"wrote": str(path), "t": cfg.t}, None)
    return 0


def cmd_compose(cfg: RunConfig, args) -> int:
    a1 = load_input(args.a, cfg)
    a2 = load_input(args.b, cfg)
    c = calculus.sharpA(a1, a2, cfg.matrix, cfg.route)
    path = _out_path(cfg, args.out, "composed.gsq")
    io.write_gsq1(path, c)
    _emit({"wrote": str(path), "route": cfg.route, "t": cfg.t}, None)
    return 0


def cmd_classify(cfg: RunConfig, args) -> int:
    a = load_input(args.symbol, cfg)
    if a.grid.d != 2:
        raise ConfigError("classify expects a symbol on a two-axis grid")
    cfg.require_bytes(16.0 * a.grid.size ** 2 * 4, "classify")
    v = envelope.classify_symbol(a, _window_for(a, cfg), cfg.s, cfg.sigma)
    _emit(v.to_dict(), args.out)
    return 0


def _gauss_symbols(sg: Grid):
    a1 = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2) * (1 + x * xi), "a1")
    a2 = sample(sg, lambda x, xi: np.exp(-(x - 0.5) ** 2 / 2 - (xi + 0.3) ** 2 / 3), "a2")
    return a1, a2


def _check_transfer(cfg):
    base = _base_1d(cfg)
    sg = quantize.symbol_grid(base)
    a = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 4) * (1 + xi), "a")
    fam = [windows.hermite(k, base) for k in range(11)]
    dev = 0.0
    for A, B in ((0.0, 0.5), (0.0, 1.0), (0.5, 1.0)):
        b = calculus.transfer_symbol(a, A, B)
        for f in fam:
            lhs = quantize.apply_op(a, A, f, route="kernel").values
            rhs = quantize.apply_op(b, B, f, route="kernel").values
            dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    return dev, 1e-8, {"pairs": [[0, 0.5], [0, 1], [0.5, 1]]}


def _check_sharp_hom(cfg):
    base = _base_1d(cfg)
    if cfg.route == "multiplier":
        cfg.require_bytes(16.0 * cfg.n ** 4 * 4, "multiplier route")
    a1, a2 = _gauss_symbols(quantize.symbol_grid(base))
    fam = [windows.hermite(k, base) for k in range(7)]
    rep = calculus.homomorphism_check(a1, a2, cfg.matrix, fam, cfg.route)
    return rep.max_dev, 1e-7, {"t": cfg.t, "route": cfg.route}


def _check_4d(cfg, fn):
    base = _base_1d(cfg)
    cfg.require_bytes(16.0 * cfg.n ** 4 * 4, "four-slot field")
    sg = quantize.symbol_grid(base)
    g = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "gauss2d")
    rep = fn(g, g, cfg.matrix)
    return rep.max_dev, 1e-7, {"t": cfg.t, **{k: v for k, v in rep.detail.items() if k != "t"}}


def _hermite_span(rng, base, kmax=10):
    c = rng.standard_normal(kmax + 1) + 1j * rng.standard_normal(kmax + 1)
    vals = sum(ck * windows.hermite(k, base).values for k, ck in enumerate(c))
    return SampledFunction(base, vals, "span")


def _check_moyal(cfg):
    rng = np.random.default_rng(cfg.seed)
    base = cfg.base()
    dev = 0.0
    for _ in range(20):
        f, g, phi, psi = (_hermite_span(rng, base) for _ in range(4))
        lhs, rhs = moyal_check(f, g, phi, psi)
        scale = max(1.0, abs(rhs))
        dev = max(dev, abs(lhs - rhs) / scale)
    return dev, 1e-10, {"pairs": 20, "seed": cfg.seed}


def _check_inversion(cfg):
    base = cfg.base()
    phi = windows.gaussian_window(base)
    dev = 0.0
    for k in range(11):
        f = windows.hermite(k, base)
        back = istft(stft(f, phi), phi)
        dev = max(dev, float(np.linalg.norm(back.values - f.values) / np.linalg.norm(f.values)))
    return dev, 1e-9, {"degrees": [0, 10]}


def _check_m_bounds(cfg):
    x = np.linspace(0, 20, 401)
    fails = 0
    rows = []
    for s in (0.5, 1.0, 2.0):
        for tau in (0.25, 1.0, 4.0):
            r = envelope.m_bounds_check(s, tau, x)
            ok = r.lower_ok and r.upper_ok
            fails += not ok
            rows.append({"s": s, "tau": tau, "log_C": r.log_C, "ok": ok})
    spreads = []
    for s in (0.5, 1.0):
        for tau in (0.25, 1.0, 4.0):
            q = envelope.m_quotient_bound_check(s, tau, 10, x)
            fails += q.spread > 2.0
            spreads.append({"s": s, "tau": tau, "spread": q.spread})
    return float(fails), 0.0, {"bounds": rows, "quotient": spreads}


def _check_kappa(cfg):
    rng = np.random.default_rng(cfg.seed)
    m = 10 ** 6
    x = rng.uniform(-10, 10, m)
    y = rng.uniform(-10, 10, m)
    s = rng.uniform(0.3, 4.0, m)
    ok = envelope.power_triangle_check(x, y, s)
    return float(np.count_nonzero(~ok)), 0.0, {"samples": m, "seed": cfg.seed}


def _check_mixed_norm(cfg):
    base = _base_1d(cfg)
    cfg.require_bytes(16.0 * cfg.n ** 4 * 4, "four-slot field")
    sg = quantize.symbol_grid(base)
    g = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "gauss2d")
    F = stft4(g, windows.gaussian_window(sg))
    omega = envelope.weight_omega("exp", r=0.0, s=cfg.s, sigma=cfg.sigma)
    Rs = sorted(float(v) for v in cfg.r_ladder)
    bad = 0
    table = {}
    for q in cfg.q_values:
        vals = [envelope.mixed_norm(F, omega, R, q, cfg.s, cfg.sigma) for R in Rs]
        bad += sum(not math.isfinite(v) for v in vals)
        bad += sum(b < a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))
        table["inf" if math.isinf(q) else f"{q:g}"] = vals
    return float(bad), 0.0, {"R": Rs, "norms": table,
                             "property": "finite and non-decreasing in R"}


def _check_mollify(cfg):
    base = _base_1d(cfg)
    sg = quantize.symbol_grid(base)
    a = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "gauss2d")
    phi = lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2)
    par = calculus.symbol_hr_params(windows.GevreyParams(cfg.s, cfg.sigma, h=1.0, r=0.0))
    dists = []
    for eps in (0.5, 0.25, 0.125):
        m = calculus.mollify(a, phi, eps)
        dists.append(windows.hr_norm(m.with_values(m.values - a.values), par, 6))
    bad = sum(b >= a_ for a_, b in zip(dists, dists[1:]))
    return float(bad), 0.0, {"eps": [0.5, 0.25, 0.125], "distances": dists}


def _check_trace(cfg):
    base = _base_1d(cfg)
    cfg.require_bytes(16.0 * cfg.n ** 4 * 4, "four-slot field")
    sg = quantize.symbol_grid(base)
    a1 = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "a1")
    a2 = sample(sg, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 3) * (1 + x), "a2")
    F = calculus.FourDField.tensor(a1, a2)
    rep = calculus.trace_leibniz_check(F, windows.GevreyParams(cfg.s, cfg.sigma, h=1.0, r=0.1), 4)
    excess = max(0.0, rep["lhs"] / rep["rhs"] - 1.0) if rep["rhs"] > 0 else math.inf
    return excess, 1e-9, {"lhs": rep["lhs"], "rhs": rep["rhs"]}


VERIFY = {
    "transfer": _check_transfer,
    "sharp-hom": _check_sharp_hom,
    "stft-kernel": lambda cfg: _check_4d(cfg, calculus.stft_kernel_relation_check),
    "covariance": lambda cfg: _check_4d(cfg, calculus.stft_covariance_check),
    "moyal": _check_moyal,
    "inversion": _check_inversion,
    "m-bounds": _check_m_bounds,
    "kappa": _check_kappa,
    "mixed-norm": _check_mixed_norm,
    "mollify": _check_mollify,
    "trace": _check_trace,
}


def scaled(cfg: RunConfig, name: str) -> RunConfig:
    """Apply the check's default ``n`` and ``L`` unless either was set explicitly."""
    if cfg.n_given or cfg.L is not None or name not in CHECK_SCALE:
        return cfg
    data = {f.name: getattr(cfg, f.name) for f in fields(RunConfig) if f.init}
    data.update(CHECK_SCALE[name])
    return RunConfig(**data)


def run_check(name: str, cfg: RunConfig, timings: bool = False) -> dict:
    cfg = scaled(cfg, name)
    t0 = time.perf_counter()
    dev, tol, detail = VERIFY[name](cfg)
    if cfg.tolerance is not None:
        tol = cfg.tolerance
    report = {"check": name, "max_dev": float(dev), "tolerance": float(tol),
              "pass": bool(dev <= tol), "n": cfg.n, "detail": detail}
    if timings:
        report["seconds"] = round(time.perf_counter() - t0, 3)
    return report


def cmd_verify(cfg: RunConfig, args) -> int:
    report = run_check(args.check, cfg, args.timings)
    _emit(report, args.out)
    return 0 if report["pass"] else 1


def _float_or_inf(text: str):
    return "inf" if text == "inf" else float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON RunConfig; flags override its fields")
    common.add_argument("--d", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--L", type=float)
    common.add_argument("--s", type=float)
    common.add_argument("--sigma", type=float)
    common.add_argument("--t", type=float, help="scalar quantization parameter A = t I")
    common.add_argument("--matrix", help="same as --t, written t=0.5")
    common.add_argument("--window")
    common.add_argument("--seed", type=int)
    common.add_argument("--route", choices=("kernel", "multiplier"))
    common.add_argument("--memory-mb", dest="memory_mb", type=float)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--q", type=_float_or_inf, nargs="+")

    p = argparse.ArgumentParser(prog="gsq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a builtin input as GSQ1")
    g.add_argument("name")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("stft", parents=[common], help="STFT field, sidecar and CSV")
    s.add_argument("input", help="GSQ1 path or builtin name")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stft)

    q = sub.add_parser("quantize", parents=[common], help="apply Op_A(a) to a function")
    q.add_argument("symbol")
    q.add_argument("--input", required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_quantize)

    c = sub.add_parser("compose", parents=[common], help="twisted product a #_A b")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compose)

    k = sub.add_parser("classify", parents=[common], help="class verdict of a symbol")
    k.add_argument("symbol")
    k.add_argument("--out")
    k.set_defaults(func=cmd_classify)

    v = sub.add_parser("verify", parents=[common], help="run a named identity check")
    v.add_argument("--check", required=True, choices=CHECKS)
    v.add_argument("--out")
    v.add_argument("--timings", action="store_true", help="add wall time to the report")
    v.set_defaults(func=cmd_verify)
    return p


def _overrides(args) -> dict:
    keys = ("d", "n", "L", "s", "sigma", "t", "window", "seed", "route", "memory_mb",
            "out_dir", "tolerance", "q")
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "matrix", None):
        kv = _parse_kv(args.matrix)
        if set(kv) != {"t"}:
            raise ConfigError("--matrix takes the form t=<value>")
        out["t"] = kv["t"]
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return args.func(cfg, args)
    except (ConfigError, ValueError, MemoryError) as exc:
        print(f"gsq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
