"""Command-line front end.

    irregwave estimate --input data.csv --x0 0.5 --alpha 2 --b 0
    irregwave simulate --scenario scenarios/smooth_alpha2.toml --seed 1
    irregwave rates    --scenario scenarios/smooth_alpha2.toml
    irregwave fitg     --input xs.csv

Settings come from an optional TOML file (``--config`` / ``--scenario``)
overridden by ``--key value`` flags; see docs/config.md for the keys.
Exit codes: 0 success, 2 input error, 3 regime or configuration error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .adapt import EstimatorConfig, estimate_sigma, fit_integrable, fit_two_stage
from .bench import Scenario, calibrate, get_function, run_monte_carlo
from .design import empirical_gram, fit_zero, power_density, read_design_csv, uniform_density
from .errors import (
    ConfigError,
    DesignError,
    DomainError,
    IndexSetError,
    InputError,
    InsufficientDataError,
    IrregWaveError,
    LevelError,
    NumericError,
    RegimeError,
    SampleSizeError,
)
from .io import read_xy
from .wavelet import make_basis

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


def _int_list(v):
    if isinstance(v, str):
        v = [p for p in v.replace(" ", "").split(",") if p]
    if not isinstance(v, (list, tuple)):
        raise ValueError("expected a list of integers")
    out = []
    for item in v:
        if isinstance(item, float) and not item.is_integer():
            raise ValueError(f"{item} is not an integer")
        out.append(int(item))
    return out


def _bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes", "on"):
        return True
    if str(v).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v):
    return None if v is None or (isinstance(v, str) and v.lower() == "none") else float(v)


_COMMON = {"out": (str, "."), "seed": (int, 0), "threads": (int, None), "N": (int, 3), "P": (int, 12)}

_ESTIMATOR = {
    "d": (_opt_float, None),
    "lam": (_opt_float, None),
    "sigma": (float, 1.0),
    "estimate_sigma": (_bool, False),
    "f_sup": (_opt_float, None),
    "mode": (str, "plugin"),
    "grid_P": (int, 12),
    "constants": (str, "theory"),
    "delta_tol": (float, 1e-3),
}

SCHEMAS = {
    "estimate": {
        **_COMMON,
        **_ESTIMATOR,
        "input": (str, None),
        "x0": (_opt_float, None),
        "alpha": (_opt_float, None),
        "b": (float, 0.0),
        "beta": (float, 1.0),
        "fit_g": (_bool, False),
        "estimator": (str, "auto"),
        "curve_points": (int, 4096),
    },
    "simulate": {
        **_COMMON,
        **_ESTIMATOR,
        "function": (str, "trig"),
        "x0": (float, 0.5),
        "alpha": (float, 1.0),
        "b": (float, 0.0),
        "beta": (float, 1.0),
        "n_grid": (_int_list, [1024, 2048, 4096]),
        "R": (int, 20),
        "noise": (float, 1.0),
        "design": (str, "random"),
        "estimator": (str, "auto"),
        "pilot_quantile": (float, 0.9),
        "pilot_R": (int, 20),
        "tol": (float, 0.15),
    },
    "fitg": {
        "out": (str, "."),
        "input": (str, None),
        "x0": (_opt_float, None),
        "z_max": (float, 0.25),
        "min_count": (int, 30),
    },
}
SCHEMAS["rates"] = SCHEMAS["simulate"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="irregwave", description="Wavelet regression for designs with a vanishing density.")
    p.add_argument("--version", action="version", version=f"irregwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", "--scenario", dest="config_file", default=None)
        for key in schema:
            flags = sorted({f"--{key}", f"--{key.replace('_', '-')}"})
            if schema[key][0] is _bool:
                sp.add_argument(*flags, dest=key, nargs="?", const="true", default=None)
            else:
                sp.add_argument(*flags, dest=key, default=None)
    return p


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    """Defaults < config file < command-line flags; every value type-checked."""
    schema = SCHEMAS[command]
    cfg = {k: default for k, (_, default) in schema.items()}
    if ns.config_file:
        path = Path(ns.config_file)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise InputError(f"{path}: cannot open ({exc.strerror})") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        unknown = sorted(set(data) - set(schema))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {unknown}")
        for k, v in data.items():
            if isinstance(v, dict):
                raise ConfigError(f"{path}: nested table {k!r} not supported; the schema is flat")
            cfg[k] = v
        base = path.parent
        for k in ("input",):
            if k in data and isinstance(data[k], str) and not Path(data[k]).is_absolute():
                cfg[k] = str(base / data[k])
    for k in schema:
        v = getattr(ns, k, None)
        if v is not None:
            cfg[k] = v
    for k, (conv, _) in schema.items():
        if cfg[k] is None:
            continue
        try:
            cfg[k] = conv(cfg[k])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {cfg[k]!r} ({exc})") from None
    if "threads" in cfg and cfg["threads"] is None:
        env = os.environ.get("IRREGWAVE_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"IRREGWAVE_THREADS={env!r} is not an integer") from None
    if cfg.get("threads") is not None and cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def _estimator_config(cfg: dict, sigma: float) -> EstimatorConfig:
    constants = cfg["constants"]
    return EstimatorConfig(
        d=cfg["d"], lam=cfg["lam"], sigma=sigma, f_sup=cfg["f_sup"], mode=cfg["mode"],
        grid_P=cfg["grid_P"], constants=constants, delta_tol=cfg["delta_tol"],
    )


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def run_estimate(cfg: dict) -> int:
    if not cfg["input"]:
        raise ConfigError("estimate needs --input")
    xs, ys = read_xy(cfg["input"])
    basis = make_basis(cfg["N"], cfg["P"])
    gram_fn = None
    zero_info = None
    if cfg["fit_g"]:
        zf = fit_zero(xs, x0_hint=cfg["x0"])
        zero_info = zf.to_dict()
        if zf.zero_detected:
            density = power_density(zf.x0_hat, zf.alpha_hat)

            def gram_fn(m, sets, xs=xs):
                return empirical_gram(xs, basis, m, sets)
        else:
            density = uniform_density(0.5)
    else:
        if cfg["x0"] is None or cfg["alpha"] is None:
            raise ConfigError("give --x0 and --alpha, or --fit-g")
        if cfg["b"] == 0:
            density = power_density(cfg["x0"], cfg["alpha"])
        else:
            density = power_density(cfg["x0"], cfg["alpha"], cfg["b"], cfg["beta"])
    sigma = estimate_sigma((xs, ys), density) if cfg["estimate_sigma"] else cfg["sigma"]
    if sigma <= 0:
        raise NumericError("estimated noise level is zero; pass --sigma explicitly")
    ecfg = _estimator_config(cfg, sigma)
    branch = cfg["estimator"]
    integrable = density.integrable_inverse or not density.has_zero
    if branch == "auto":
        branch = "integrable" if integrable else "two-stage"
    if branch == "integrable":
        res = fit_integrable((xs, ys), density, basis, ecfg)
    elif branch == "two-stage":
        res = fit_two_stage((xs, ys), density, basis, ecfg, gram_fn=gram_fn)
    else:
        raise ConfigError(f"estimator must be auto, two-stage or integrable, got {branch!r}")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    blob = res.to_dict()
    blob["density"] = {"x0": density.x0, "alpha": density.alpha, "b": density.b, "beta": density.beta,
                       "Cg": density.Cg, "has_zero": density.has_zero}
    blob["config"] = {k: v for k, v in cfg.items() if k not in ("threads", "out")}
    if zero_info is not None:
        blob["zero_fit"] = zero_info
    _write_json(out / "fit.json", blob)
    res.write_curve(out / "curve.csv", cfg["curve_points"])
    print(f"{res.branch}: m_hat={res.m_hat} J={res.tree.J} -> {out / 'fit.json'}, {out / 'curve.csv'}")
    return EXIT_OK


def _scenario(cfg: dict) -> tuple[Scenario, dict]:
    fn = get_function(cfg["function"])
    if cfg["b"] == 0:
        density = power_density(cfg["x0"], cfg["alpha"])
    else:
        density = power_density(cfg["x0"], cfg["alpha"], cfg["b"], cfg["beta"])
    constants = cfg["constants"]
    if constants not in ("theory", "calibrated", "pilot"):
        raise ConfigError("constants must be theory, calibrated or pilot")
    ecfg = EstimatorConfig(
        d=cfg["d"], lam=cfg["lam"], sigma=cfg["sigma"], f_sup=cfg["f_sup"], mode=cfg["mode"],
        grid_P=cfg["grid_P"], constants="theory" if constants == "pilot" else constants,
        delta_tol=cfg["delta_tol"],
    )
    sc = Scenario(fn, density, N=cfg["N"], cfg=ecfg, n_grid=tuple(cfg["n_grid"]), R=cfg["R"], seed=cfg["seed"],
                  sigma=cfg["noise"], design=cfg["design"], estimator=cfg["estimator"], grid_P=cfg["grid_P"])
    meta = {"constants": constants}
    if constants == "pilot":
        pilot_seed = int(np.random.SeedSequence([cfg["seed"], 1]).generate_state(1)[0])
        d, lam = calibrate(sc, R=cfg["pilot_R"], quantile=cfg["pilot_quantile"], seed=pilot_seed)
        sc = replace(sc, cfg=replace(ecfg, d=d, lam=lam, constants="calibrated"))
        meta.update({"pilot_d": d, "pilot_lambda": lam, "pilot_seed": pilot_seed})
    return sc, meta


def load_scenario(path, **overrides) -> tuple[Scenario, dict]:
    """Build the Monte Carlo scenario a ``rates --scenario path`` run would use.

    Keyword overrides behave like command-line flags.
    """
    schema = SCHEMAS["rates"]
    bad = sorted(set(overrides) - set(schema))
    if bad:
        raise ConfigError(f"unknown keys {bad}")
    ns = argparse.Namespace(config_file=str(path), **{k: overrides.get(k) for k in schema})
    return _scenario(resolve_config("rates", ns))


def _simulate(cfg: dict, verdict: bool) -> int:
    sc, meta = _scenario(cfg)
    if verdict and len(sc.n_grid) < 3:
        raise ConfigError("rates needs at least 3 sample sizes in n_grid")
    report = run_monte_carlo(sc, threads=cfg["threads"], tol=cfg["tol"])
    report.extras.update(meta)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "risks.csv")
    blob = report.to_dict()
    blob["scenario"] = {k: v for k, v in cfg.items() if k not in ("threads", "out")}
    if verdict:
        blob["verdict"] = {
            "slope": report.slope,
            "theory": report.theory,
            "pass": report.passed,
            "criterion": "strictly decreasing risk" if sc.density.b > 0 else f"|slope - theory| <= {report.tol}",
        }
        print(f"slope={report.slope:.4f} theory={report.theory:.4f} {'PASS' if report.passed else 'FAIL'}")
    else:
        for n, r, s in zip(report.n_grid, report.mean_risk, report.stderr):
            print(f"n={n:>8d}  risk={r:.6g}  se={s:.2g}")
    _write_json(out / "report.json", blob)
    return EXIT_OK


def run_simulate(cfg: dict) -> int:
    return _simulate(cfg, verdict=False)


def run_rates(cfg: dict) -> int:
    return _simulate(cfg, verdict=True)


def run_fitg(cfg: dict) -> int:
    if not cfg["input"]:
        raise ConfigError("fitg needs --input")
    xs = read_design_csv(cfg["input"])
    zf = fit_zero(xs, x0_hint=cfg["x0"], min_count=cfg["min_count"], z_max=cfg["z_max"])
    out = Path(cfg["out"])
    _write_json(out / "zerofit.json", zf.to_dict())
    print(f"x0_hat={zf.x0_hat:.6g} alpha_hat={zf.alpha_hat:.4g} Cg_hat={zf.Cg_hat:.4g} detected={zf.zero_detected}")
    return EXIT_OK


COMMANDS = {"estimate": run_estimate, "simulate": run_simulate, "rates": run_rates, "fitg": run_fitg}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (InputError, DesignError, DomainError, InsufficientDataError)):
        return EXIT_INPUT
    if isinstance(exc, (ConfigError, RegimeError, LevelError, SampleSizeError, IndexSetError)):
        return EXIT_CONFIG
    if isinstance(exc, (NumericError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    return EXIT_INPUT if isinstance(exc, IrregWaveError) else 1


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve_config(ns.command, ns)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[ns.command](cfg)
    except (IrregWaveError, np.linalg.LinAlgError, ArithmeticError) as exc:
        code = exit_code(exc)
        print(f"irregwave: error: {exc}", file=sys.stderr)
        if isinstance(exc, RegimeError):
            print("irregwave: hint: integrable 1/g (b = 0, alpha < 1) uses the single-stage estimator; "
                  "otherwise the two-stage one", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
