"""Command line entry point: ``rabisq {spectrum,variance,qfunction,selftest}``.

Each subcommand reads a JSON config (optionally layered over a named
preset), writes CSV tables and gnuplot scripts to the output directory and
exits with 0 on success, 2 on a config error, 3 on a numeric failure and 4
on an I/O error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rabisq import phasespace, spectrum
from rabisq.dynamics import make_propagator
from rabisq.errors import ConfigError, InvalidParam, NumericError
from rabisq.model import ModelParams, validate

DEFAULTS = {
    "params": {"omega": 1.0, "delta": 0.3, "lam": 0.1, "g": 0.0},
    "n_trunc": 100,
    "n_max_levels": 8,
    "lambda_grid": {"start": 0.0, "stop": 1.0, "num": 51},
    "time_grid": {"t_max": 300.0, "dt": 0.25},
    "phi": 0.0,
    "window": None,
    "polar_time": None,
    "q_time": 0.0,
    "beta_grid": {"range": "auto", "resolution": 161},
    "n_theta": 72,
    "propagator": "grwa",
    "output_dir": ".",
}

# The two spectrum sets carry a nominal lambda for the dynamics subcommands. The
# fig2b window skips the early parametric dip near omega t = 2.
PRESETS = {
    "fig1a": {"params": {"delta": 0.5, "lam": 0.5, "g": 0.35}, "n_trunc": 60},
    "fig1b": {"params": {"delta": 1.0, "lam": 0.5, "g": 0.2}, "n_trunc": 60},
    "fig2a": {"params": {"delta": 0.3, "lam": 0.1, "g": 0.0}, "q_time": 220.0},
    "fig2b": {"params": {"delta": 0.3, "lam": 0.1, "g": 0.35}, "window": [261.0, 267.0], "q_time": 264.0},
    "fig2c": {"params": {"delta": 1.0, "lam": 0.15, "g": 0.2}, "q_time": 254.0},
}

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    n_trunc: int
    n_max_levels: int
    lambda_grid: np.ndarray
    t_max: float
    dt: float
    phi: float
    window: tuple[float, float] | None
    polar_time: float | None
    q_time: float
    beta_range: float | None
    beta_resolution: int
    n_theta: int
    propagator: str
    output_dir: Path

    @property
    def times(self) -> np.ndarray:
        return phasespace.default_times(self.t_max, self.dt)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _number(raw, name: str, kind=float):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"'{name}' must be a number")
    if kind is int:
        if isinstance(raw, float) and not raw.is_integer():
            raise ConfigError(f"'{name}' must be an integer")
        return int(raw)
    if not math.isfinite(raw):
        raise ConfigError(f"'{name}' must be finite")
    return float(raw)


def build_config(raw: dict | None = None, preset: str | None = None, out: str | None = None) -> RunConfig:
    merged = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (choose from {', '.join(sorted(PRESETS))})")
        merged = _merge(merged, PRESETS[preset])
    if raw is not None:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        merged = _merge(merged, raw)
    if out is not None:
        merged["output_dir"] = out

    pr = merged["params"]
    params = ModelParams(*(_number(pr[k], f"params.{k}") for k in ("omega", "delta", "lam", "g")))
    bad = validate(params)
    if bad:
        raise ConfigError(f"invalid parameters: {', '.join(bad)}")

    n_trunc = _number(merged["n_trunc"], "n_trunc", int)
    if not 10 <= n_trunc <= 2000:
        raise ConfigError("'n_trunc' must lie in [10, 2000]")
    n_levels = _number(merged["n_max_levels"], "n_max_levels", int)
    if not 1 <= n_levels <= n_trunc:
        raise ConfigError("'n_max_levels' must lie in [1, n_trunc]")

    lg = merged["lambda_grid"]
    num = _number(lg["num"], "lambda_grid.num", int)
    start, stop = _number(lg["start"], "lambda_grid.start"), _number(lg["stop"], "lambda_grid.stop")
    if num < 1 or start < 0 or stop < start:
        raise ConfigError("'lambda_grid' needs num >= 1 and 0 <= start <= stop")
    lambda_grid = np.linspace(start, stop, num)

    t_max = _number(merged["time_grid"]["t_max"], "time_grid.t_max")
    dt = _number(merged["time_grid"]["dt"], "time_grid.dt")
    if t_max <= 0 or dt <= 0 or dt > t_max:
        raise ConfigError("'time_grid' needs 0 < dt <= t_max")

    window = merged["window"]
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise ConfigError("'window' must be null or [t_start, t_end]")
        window = (_number(window[0], "window"), _number(window[1], "window"))
        if window[1] < window[0]:
            raise ConfigError("'window' end precedes its start")
        if window[0] > t_max:
            raise ConfigError(f"'window' starts after time_grid.t_max = {t_max}")

    polar_time = merged["polar_time"]
    polar_time = None if polar_time is None else _number(polar_time, "polar_time")

    bg = merged["beta_grid"]
    beta_range = None if bg["range"] == "auto" else _number(bg["range"], "beta_grid.range")
    if beta_range is not None and beta_range <= 0:
        raise ConfigError("'beta_grid.range' must be positive or \"auto\"")
    resolution = _number(bg["resolution"], "beta_grid.resolution", int)
    if resolution < 3:
        raise ConfigError("'beta_grid.resolution' must be >= 3")
    n_theta = _number(merged["n_theta"], "n_theta", int)
    if n_theta < 4:
        raise ConfigError("'n_theta' must be >= 4")

    prop = merged["propagator"]
    if prop not in ("grwa", "exact", "both"):
        raise ConfigError("'propagator' must be one of grwa, exact, both")
    if not isinstance(merged["output_dir"], str):
        raise ConfigError("'output_dir' must be a string")

    return RunConfig(
        params=params,
        n_trunc=n_trunc,
        n_max_levels=n_levels,
        lambda_grid=lambda_grid,
        t_max=t_max,
        dt=dt,
        phi=_number(merged["phi"], "phi"),
        window=window,
        polar_time=polar_time,
        q_time=_number(merged["q_time"], "q_time"),
        beta_range=beta_range,
        beta_resolution=resolution,
        n_theta=n_theta,
        propagator=prop,
        output_dir=Path(merged["output_dir"]),
    )


def load_config(path: str | None, preset: str | None, out: str | None) -> RunConfig:
    raw = None
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return build_config(raw, preset, out)


def _fmt(x) -> str:
    return f"{x:.12g}"


def write_csv(path: Path, header: list[str], rows, footer: list[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
        for line in footer:
            fh.write(line + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


SPECTRUM_GP = """set datafile separator ','
set key top left
set xlabel 'lambda/omega'
set ylabel 'E/omega'
plot for [k=0:{last}] 'spectrum.csv' using 1:($2==k ? $3 : 1/0) with lines lc rgb 'blue' notitle, \\
     for [k=0:{last}] 'spectrum.csv' using 1:($2==k ? $4 : 1/0) with points pt 7 ps 0.4 lc rgb 'black' notitle
"""

VARIANCE_GP = """set datafile separator ','
set xlabel 'omega t'
set ylabel 'V_phi'
plot '{name}' using 1:2 with lines lc rgb 'blue' title 'V_phi', \\
     0.5 with lines lc rgb 'red' title 'classical limit'
"""

VARIANCE_POLAR_GP = """set datafile separator ','
set polar
set size square
unset xtics
unset ytics
plot 'variance_polar.csv' using 1:2 with lines lc rgb 'blue' title 'V_phi', \\
     0.5 with lines lc rgb 'red' title 'classical limit'
"""

QGRID_GP = """set datafile separator ','
set size square
set xlabel 'Re beta'
set ylabel 'Im beta'
set cbrange [0:1/pi]
plot 'qgrid.csv' using 1:2:3 with image notitle
"""

QPOLAR_GP = """set datafile separator ','
set polar
set size square
unset xtics
unset ytics
plot 'qpolar.csv' using 1:2 with lines lc rgb 'blue' title 'Q(theta)', \\
     1/(2*pi) with lines lc rgb 'red' title '1/(2 pi)'
"""


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    table = spectrum.spectrum_compare(cfg.params, cfg.lambda_grid, cfg.n_max_levels, cfg.n_trunc)
    dev = table.deviation
    rows = []
    for i, lam in enumerate(table.lambda_grid):
        for k in range(table.level_count):
            rows.append((lam, str(k), table.levels_grwa[i, k], table.levels_exact[i, k], dev[i, k]))
    out = cfg.output_dir
    write_csv(out / "spectrum.csv", ["lambda_over_omega", "level_index", "e_grwa", "e_exact", "abs_dev"], rows)
    _write_text(out / "spectrum.gp", SPECTRUM_GP.format(last=table.level_count - 1))
    print(f"max_abs_dev,{_fmt(float(dev.max()))}")
    return [out / "spectrum.csv", out / "spectrum.gp"]


def _variance_outputs(cfg: RunConfig, kind: str, suffix: str) -> list[Path]:
    out = cfg.output_dir
    prop = make_propagator(cfg.params, kind, cfg.n_trunc)
    series = phasespace.variance_series(cfg.params, cfg.phi, cfg.times, kind, cfg.n_trunc, cfg.window, prop=prop)
    name = f"variance{suffix}.csv"
    write_csv(out / name, ["omega_t", "v_phi"], zip(series.times, series.v_phi))
    write_csv(out / f"summary{suffix}.csv", ["min_value", "min_time"], [(series.min_value, series.min_time)])
    _write_text(out / f"variance{suffix}.gp", VARIANCE_GP.format(name=name))
    print(f"{kind},min_value,{_fmt(series.min_value)},min_time,{_fmt(series.min_time)}")
    files = [out / name, out / f"summary{suffix}.csv", out / f"variance{suffix}.gp"]
    if suffix == "":
        t_polar = series.min_time if cfg.polar_time is None else cfg.polar_time
        m = phasespace.moments(prop.density(t_polar))
        phis = np.linspace(0.0, 2 * math.pi, 361)
        write_csv(out / "variance_polar.csv", ["phi", "v_phi"], ((f, phasespace.variance_phi(m, f)) for f in phis))
        _write_text(out / "variance_polar.gp", VARIANCE_POLAR_GP)
        files += [out / "variance_polar.csv", out / "variance_polar.gp"]
    return files


def cmd_variance(cfg: RunConfig) -> list[Path]:
    if cfg.propagator == "both":
        return _variance_outputs(cfg, "grwa", "") + _variance_outputs(cfg, "exact", "_exact")
    return _variance_outputs(cfg, cfg.propagator, "")


def cmd_qfunction(cfg: RunConfig, t_scaled: float | None = None) -> list[Path]:
    t = cfg.q_time if t_scaled is None else t_scaled
    kind = "grwa" if cfg.propagator == "both" else cfg.propagator
    rho = make_propagator(cfg.params, kind, cfg.n_trunc).density(t)
    grid = phasespace.q_grid(rho, cfg.beta_range, cfg.beta_resolution, t)
    out = cfg.output_dir
    re, im = np.meshgrid(grid.re_axis, grid.im_axis)
    rows = zip(re.ravel(), im.ravel(), grid.values.ravel())
    write_csv(out / "qgrid.csv", ["re_beta", "im_beta", "q"], rows, [f"# normalization={_fmt(grid.integral)}"])
    thetas = 2 * math.pi * np.arange(cfg.n_theta) / cfg.n_theta
    q_theta = phasespace.polar_density_many(rho, thetas)
    total = float(np.sum(q_theta) * 2 * math.pi / cfg.n_theta)
    write_csv(out / "qpolar.csv", ["theta", "q_theta"], zip(thetas, q_theta), [f"# normalization={_fmt(total)}"])
    _write_text(out / "qgrid.gp", QGRID_GP)
    _write_text(out / "qpolar.gp", QPOLAR_GP)
    print(f"grid_normalization,{_fmt(grid.integral)},polar_normalization,{_fmt(total)}")
    return [out / "qgrid.csv", out / "qpolar.csv", out / "qgrid.gp", out / "qpolar.gp"]


def _selftest_checks(cfg: RunConfig):
    from rabisq.dynamics import coefficients_analytic, coefficients_oracle
    from rabisq.model import derive
    from rabisq.specfun import mehler_check

    yield "mehler identity", max(mehler_check(x, y, t) for x in (-1.0, 0.5) for y in (0.0, 1.5) for t in (-0.5, 0.3)) < 1e-8

    table = spectrum.spectrum_compare(cfg.params.replace(lam=0.0), [0.0], min(cfg.n_max_levels, 8), 60)
    yield "decoupled spectrum", float(table.deviation.max()) < 1e-8

    vac = np.zeros((cfg.n_trunc + 1, cfg.n_trunc + 1))
    vac[0, 0] = 1.0
    yield "vacuum Q peak", abs(phasespace.husimi_q(vac, 0.0) - 1 / math.pi) < 1e-12
    yield "vacuum variance", abs(phasespace.variance_phi(vac, cfg.phi) - 0.5) < 1e-12

    p = cfg.params if cfg.params.g > 0 else cfg.params.replace(g=0.2)
    d = derive(p)
    spec = spectrum.grwa_spectrum(p, d, 15)
    c1 = coefficients_analytic(spec, d, 15).vector()
    c2 = coefficients_oracle(spec, d, 15, cfg.n_trunc).vector()
    yield "coefficients vs oracle", float(np.max(np.abs(c1 - c2))) < 1e-7


def cmd_selftest(cfg: RunConfig) -> bool:
    ok = True
    for name, passed in _selftest_checks(cfg):
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= bool(passed)
    return ok


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rabisq", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (
        ("spectrum", "GRWA vs exact energy levels over a lambda grid"),
        ("variance", "quadrature variance time series and its minimum"),
        ("qfunction", "Husimi Q on a grid and its polar density"),
        ("selftest", "quick internal consistency checks"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="JSON config file (layered over the preset)")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        if name == "qfunction":
            sp.add_argument("--time", type=float, help="omega t at which to evaluate (overrides q_time)")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("give --config, --preset or both")
        cfg = load_config(args.config, args.preset, args.out)
        if args.command != "selftest":
            cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "spectrum":
            cmd_spectrum(cfg)
        elif args.command == "variance":
            cmd_variance(cfg)
        elif args.command == "qfunction":
            cmd_qfunction(cfg, args.time)
        elif not cmd_selftest(cfg):
            return EXIT_NUMERIC
    except (ConfigError, InvalidParam) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
