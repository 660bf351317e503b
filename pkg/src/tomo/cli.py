"""``tomo`` command line: forward data, reconstruction and resolution curves as CSV.

Config files are flat ``key = value`` text with ``#`` comments.  Membrane
perturbation modes are given as ``h.<p> = <re>,<im>``; negative modes are
filled in by conjugation.  Exit codes: 0 ok, 1 self-test failure,
2 config error, 3 I/O error, 4 unresolvable mode.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import cellfield, forward, inversion, resolution
from .model import (CONVENTIONS, CellGeometry, ImagingContext, MeasurementMatrix, MembraneModel,
                    ModeSpectrum, OpticalParams)

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_IO, EXIT_UNRESOLVABLE = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config error at '{key}': {message}")


class DataError(ValueError):
    pass


_OPTICAL = {f.name: f for f in fields(OpticalParams)}


@dataclass
class RunConfig:
    params: OpticalParams
    beta: float
    R: float
    z: int
    M: int = 10
    eps: float = 0.01
    sigma_noise: float = 0.0
    seed: int = 0
    omega: float = 1.0e9
    n_max: int = 10
    h_spec: list = field(default_factory=list)
    convention: str = "derived"
    snr: list = field(default_factory=lambda: [1e1, 1e2, 1e3, 1e4])
    snr_min: float = 10.0
    snr_max: float = 1e6
    snr_points: int = 50
    r_min: float = 0.01
    r_max: float = 0.1
    r_points: int = 50

    @property
    def context(self):
        return ImagingContext(self.params, MembraneModel(self.beta), R=self.R, omega=self.omega,
                              convention=self.convention)

    @property
    def h_hat(self):
        coeffs = {}
        for p, re, im in self.h_spec:
            coeffs[p] = complex(re, im)
        return ModeSpectrum(coeffs, band_limit=max(self.M, max((abs(p) for p in coeffs), default=0)),
                            real=True)


_SCALARS = {
    "beta": float, "R": float, "z": int, "M": int, "eps": float, "sigma_noise": float,
    "seed": int, "omega": float, "n_max": int, "convention": str,
    "snr_min": float, "snr_max": float, "snr_points": int,
    "r_min": float, "r_max": float, "r_points": int,
}
REQUIRED = ("R", "z")


def _convert(key, kind, raw):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> RunConfig:
    """Parse config text; every failure names the key involved."""
    optical, scalars, h = {}, {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in optical or key in scalars or key in h:
            raise ConfigError(key, "duplicate key")
        if key in _OPTICAL:
            optical[key] = _convert(key, int if key == "dim" else float, raw)
        elif key in _SCALARS:
            scalars[key] = _convert(key, _SCALARS[key], raw)
        elif key == "snr":
            try:
                scalars["snr"] = [float(s) for s in raw.split(",") if s.strip()]
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw!r} as a list of numbers") from None
            if not scalars["snr"] or any(s <= 0 for s in scalars["snr"]):
                raise ConfigError(key, "SNR values must be positive")
        elif key.startswith("h."):
            try:
                p = int(key[2:])
                parts = [float(s) for s in raw.split(",")]
            except ValueError:
                raise ConfigError(key, "expected h.<int> = <re>,<im>") from None
            if len(parts) != 2:
                raise ConfigError(key, "expected h.<int> = <re>,<im>")
            h[key] = (p, complex(*parts))
        else:
            raise ConfigError(key, "unknown key")
    for key in REQUIRED:
        if key not in scalars:
            raise ConfigError(key, "required key missing")
    try:
        params = OpticalParams(**optical)
    except ValueError as exc:
        bad = next((k for k in optical if k in str(exc)), "params")
        raise ConfigError(bad, str(exc)) from None
    beta = scalars.pop("beta", 0.1)
    if not beta > 0:
        raise ConfigError("beta", "must be positive")
    cfg = RunConfig(params=params, beta=beta, R=scalars.pop("R"), z=scalars.pop("z"), **scalars)
    if not 0 < cfg.R < 1:
        raise ConfigError("R", "must satisfy 0 < R < 1")
    if cfg.z == 0:
        raise ConfigError("z", "must be non-zero")
    if cfg.M < 0:
        raise ConfigError("M", "must be non-negative")
    if cfg.n_max < 0:
        raise ConfigError("n_max", "must be non-negative")
    if cfg.eps < 0:
        raise ConfigError("eps", "must be non-negative")
    if cfg.sigma_noise < 0:
        raise ConfigError("sigma_noise", "must be non-negative")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    if cfg.omega < 0:
        raise ConfigError("omega", "must be non-negative")
    if cfg.convention not in CONVENTIONS:
        raise ConfigError("convention", f"must be one of {CONVENTIONS}")
    cfg.h_spec = _hermitian_modes(h)
    return cfg


def _hermitian_modes(h):
    modes = {p: (key, v) for key, (p, v) in h.items()}
    out = {}
    for p, (key, v) in modes.items():
        if p == 0 and v.imag != 0:
            raise ConfigError(key, "mode 0 of a real perturbation must be real")
        mirror = modes.get(-p)
        if mirror is not None and abs(mirror[1] - np.conj(v)) > 1e-12 * max(1.0, abs(v)):
            raise ConfigError(key, f"inconsistent with h.{-p}: the perturbation must be real")
        out[p] = v
        out[-p] = np.conj(v)
    return [(p, v.real, v.imag) for p, v in sorted(out.items())]


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text)


# ------------------------------------------------------------------ CSV

def _fmt(x):
    return f"{x:.17g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_matrix(path, mat: MeasurementMatrix):
    n = mat.n_max
    rows = []
    for m in range(-n, n + 1):
        for k in range(-n, n + 1):
            v = mat.entries[m + n, k + n]
            rows.append([m, k, _fmt(v.real), _fmt(v.imag)])
    _write_rows(path, ["m", "n", "re", "im"], rows)


def read_matrix(path) -> MeasurementMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["m", "n", "re", "im"] or len(rows) < 2:
        raise DataError(f"{path}: expected header m,n,re,im followed by data rows")
    try:
        data = [(int(r[0]), int(r[1]), float(r[2]), float(r[3])) for r in rows[1:] if r]
    except (ValueError, IndexError):
        raise DataError(f"{path}: malformed data row") from None
    n_max = max(max(abs(m), abs(n)) for m, n, _, _ in data)
    if len(data) != (2 * n_max + 1) ** 2:
        raise DataError(f"{path}: expected a dense square of {(2 * n_max + 1) ** 2} rows, got {len(data)}")
    mat = MeasurementMatrix.zeros(n_max)
    seen = set()
    for m, n, re, im in data:
        if (m, n) in seen:
            raise DataError(f"{path}: duplicate entry ({m}, {n})")
        seen.add((m, n))
        mat.entries[m + n_max, n + n_max] = complex(re, im)
    return mat


def write_spectrum(path, spec: ModeSpectrum):
    _write_rows(path, ["p", "re", "im"], [[p, _fmt(v.real), _fmt(v.imag)] for p, v in spec.items()])


def read_spectrum(path) -> ModeSpectrum:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["p", "re", "im"]:
        raise DataError(f"{path}: expected header p,re,im")
    try:
        return ModeSpectrum({int(r[0]): complex(float(r[1]), float(r[2])) for r in rows[1:] if r})
    except (ValueError, IndexError):
        raise DataError(f"{path}: malformed data row") from None


# ------------------------------------------------------------------ commands

def forward_model(cfg: RunConfig):
    """``(I_0, I_lin, eps * w)`` for the configured cell."""
    ctx = cfg.context
    h = cfg.h_hat
    state = cellfield.electro_state(cfg.z, CellGeometry(cfg.R), cfg.beta, cfg.params.delta_resp,
                                    convention=cfg.convention)
    w = cellfield.w_spectrum(state, h)
    psi1 = cellfield.psi1_spectrum(state, h, w)
    I0 = forward.intensity_matrix_unperturbed(cfg.n_max, state.c_hat, ctx)
    Il = forward.intensity_matrix_linearized(cfg.n_max, state.c_hat, psi1, h, cfg.eps, ctx)
    return I0, Il, w.scaled(cfg.eps)


def cmd_forward(config_path, out_dir):
    cfg = load_config(config_path)
    I0, Il, dv = forward_model(cfg)
    out = _out_dir(out_dir)
    write_matrix(out / "intensity_unperturbed.csv", I0)
    write_matrix(out / "intensity_linearized.csv", Il)
    write_spectrum(out / "voltage_change.csv", dv)
    return EXIT_OK


def cmd_reconstruct(config_path, data_path, out_dir):
    cfg = load_config(config_path)
    if not cfg.eps > 0:
        raise ConfigError("eps", "reconstruction needs eps > 0")
    data_path = Path(data_path)
    I_eps = read_matrix(data_path)
    volt = data_path.parent / "voltage_change.csv"
    ctx = cfg.context
    state = cellfield.electro_state(cfg.z, CellGeometry(cfg.R), cfg.beta, cfg.params.delta_resp,
                                    convention=cfg.convention)
    I0 = forward.intensity_matrix_unperturbed(I_eps.n_max, state.c_hat, ctx)
    if volt.exists():
        w = read_spectrum(volt).scaled(1.0 / cfg.eps)
    else:
        w = cellfield.w_spectrum(state, cfg.h_hat)
    a = inversion.assemble_data(I_eps, I0, w, cfg.eps, ctx)
    a = inversion.add_noise(a, inversion.NoiseModel(cfg.sigma_noise, cfg.seed))
    res = inversion.least_squares(a, cfg.z, cfg.eps, cfg.M, ctx, sigma_noise=cfg.sigma_noise,
                                  strict=False)
    rows, bad = [], []
    for p, v in res.h_est_hat.items():
        var = res.predicted_var[p]
        if math.isinf(var):
            bad.append(p)
            rows.append([p, "", "", "inf"])
        else:
            rows.append([p, _fmt(v.real), _fmt(v.imag), _fmt(var)])
    _write_rows(_out_dir(out_dir) / "h_est.csv", ["p", "re", "im", "predicted_var"], rows)
    if bad:
        print(f"unresolvable modes: {bad}", file=sys.stderr)
        return EXIT_UNRESOLVABLE
    return EXIT_OK


def _threads():
    try:
        return max(1, int(os.environ.get("TOMO_THREADS", "1")))
    except ValueError:
        return 1


def _cell(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else _fmt(x)


def cmd_resolve(config_path, mode, out_dir):
    cfg = load_config(config_path)
    ctx = cfg.context
    if abs(ctx.k) * max(cfg.r_max, cfg.R) > 0.1:
        print("warning: |k|R is not small; the small-|k|R thresholds may be inaccurate", file=sys.stderr)
    out = _out_dir(out_dir)
    if mode == "fig2":
        snrs = np.geomspace(cfg.snr_min, cfg.snr_max, cfg.snr_points)
        with ThreadPoolExecutor(_threads()) as pool:
            rows = list(pool.map(lambda s: resolution.rstar_table([s], ctx)[0], snrs))
        _write_rows(out / "rstar.csv", ["snr"] + [f"rstar_p{p}" for p in range(4)],
                    [[_fmt(r[0])] + [_cell(v) for v in r[1:]] for r in rows])
    elif mode == "fig3":
        radii = np.linspace(cfg.r_min, cfg.r_max, cfg.r_points)
        with ThreadPoolExecutor(_threads()) as pool:
            rows = list(pool.map(lambda R: resolution.maxmode_table([R], cfg.snr, ctx)[0], radii))
        _write_rows(out / "maxmode.csv", ["R_um"] + [f"pmax_snr_{s:g}" for s in cfg.snr],
                    [[_fmt(r[0])] + [str(v) for v in r[1:]] for r in rows])
    else:
        raise ConfigError("mode", "must be fig2 or fig3")
    return EXIT_OK


def selftest_checks():
    """``[(name, passed, detail)]`` for quick install verification."""
    from . import oracles
    from .model import default_context

    checks = []
    ctx = default_context()
    worst = 0.0
    for p in range(-4, 5):
        quad = resolution.resolving_integral(p, 1, ctx)
        ser = resolution.resolving_series(p, 1, ctx)
        worst = max(worst, abs(quad - ser) / ser)
    checks.append(("parseval bridge", worst <= 1e-6, f"max rel {worst:.2e}"))
    g = ModeSpectrum.delta(3)
    ana = forward.excitation_fluence_disk(g, 0.5, ctx.k, ctx.ell).coeffs[3]
    fd = oracles.helmholtz_robin_solve(g, ctx.k, ctx.ell, oracles.PolarGrid(512)).coeffs[3]
    err = abs(ana - fd) / abs(ana)
    checks.append(("fluence oracle", err <= 1e-3, f"rel {err:.2e}"))
    f0 = cellfield.boundary_potential_spectrum(1, ctx.R, ctx.beta)[1]
    ref = oracles.radial_transmission_solve(ctx.R, ctx.beta, ModeSpectrum.delta(1)).outer[1]
    err = abs(f0 - ref) / abs(ref)
    checks.append(("transmission oracle", err <= 1e-3, f"rel {err:.2e}"))
    return checks


def cmd_selftest():
    ok = True
    for name, passed, detail in selftest_checks():
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_SELFTEST


def _out_dir(out_dir):
    out = Path(out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="tomo", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["forward", "reconstruct", "resolve", "selftest"])
    ap.add_argument("--config", help="run configuration file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--data", help="intensity CSV for reconstruct")
    ap.add_argument("--mode", choices=["fig2", "fig3"], help="curve family for resolve")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if not args.config:
            raise ConfigError("--config", "a config file is required")
        if args.command == "forward":
            return cmd_forward(args.config, args.out)
        if args.command == "reconstruct":
            if not args.data:
                raise ConfigError("--data", "reconstruct needs a data file")
            return cmd_reconstruct(args.config, args.data, args.out)
        if not args.mode:
            raise ConfigError("--mode", "resolve needs --mode fig2 or fig3")
        return cmd_resolve(args.config, args.mode, args.out)
    except (ConfigError, DataError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except inversion.UnresolvableModeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_UNRESOLVABLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
