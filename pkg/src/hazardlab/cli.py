"""Command-line entry point.

Subcommands:

* ``regimes``          dump the regime catalog (CSV or JSON)
* ``check-conditions`` numeric verification of a theorem's hypotheses
* ``simulate``         Monte Carlo CLT run
* ``sample-paths``     one seeded hazard path on a time grid (plot-ready CSV)

Configuration files are INI-style: ``key = value`` lines grouped under
bracketed section headers ``[experiment]``, ``[kernel]``, ``[crm]``,
``[output]``.  Unknown keys are rejected with their line number.  Exit
codes: 0 success, 1 operational error, 2 a statistical verdict failed
(a KS p-value below threshold or an ``expect_condition_*`` mismatch).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field as dc_field
from typing import Dict, Optional, Tuple

import numpy as np

from . import __version__, crm, kernels
from .asymptotics import (Functional, NotCatalogedError, Power, PowerLog,
                          catalog_rows)
from .conditions import Theorem, check_theorem
from .montecarlo import (CENTERING_CATALOG, CENTERING_QUADRATURE,
                         ExperimentConfig, TruncationBudgetError, hazard_path,
                         run_clt, sample_crm)

__all__ = ["RunConfig", "ConfigError", "parse_config", "render_config", "run", "main"]

_KINDS = ("regimes", "check-conditions", "simulate", "sample-paths")
_DEFAULT_T_GRID = (50.0, 100.0, 200.0, 400.0, 800.0)


class ConfigError(ValueError):
    """Configuration parse/validation failure, with line context."""


@dataclass
class RunConfig:
    kind: str
    kernel: Optional[kernels.Kernel] = None
    intensity: Optional[crm.JumpIntensity] = None
    functional: Functional = Functional.CUMULATIVE_HAZARD
    theorem: str = Theorem.PATH2ND
    rate: Optional[object] = None            # None: take the catalog rate
    horizon: float = 500.0
    replicates: int = 2000
    seed: int = 0
    epsilon: float = 1e-6
    t_grid: Tuple[float, ...] = _DEFAULT_T_GRID
    centering: str = CENTERING_QUADRATURE
    ks_alpha: float = 0.01
    expects: Dict[int, str] = dc_field(default_factory=dict)
    grid_n: int = 2000
    out_path: Optional[str] = None
    out_format: str = "json"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTIONS = ("experiment", "kernel", "crm", "output")


def _tokenize(text: str):
    """Yield (lineno, section, key, value) for every assignment line."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        yield lineno, section, key.strip().lower(), value.strip()


def _as_float(value, lineno, key, cond=None, describe=""):
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be a number, got {value!r}")
    if cond is not None and not cond(x):
        raise ConfigError(f"line {lineno}: {key}={value} violates {describe}")
    return x


def _as_int(value, lineno, key, cond=None, describe=""):
    try:
        x = int(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be an integer, got {value!r}")
    if cond is not None and not cond(x):
        raise ConfigError(f"line {lineno}: {key}={value} violates {describe}")
    return x


def _take_float(fields, section, key, cond=None, describe=""):
    if key not in fields:
        raise ConfigError(f"missing required key {section}.{key}")
    value, lineno = fields.pop(key)
    return _as_float(value, lineno, f"{section}.{key}", cond, describe)


def _build_positive_fn(fields: dict, section: str) -> crm.PositiveFunction:
    fn = fields.pop("fn")[0] if "fn" in fields else "constant"
    try:
        if fn == "constant":
            return crm.Constant(_take_float(fields, section, "value",
                                            lambda x: x > 0, "value > 0"))
        if fn == "affine_sqrt":
            a = _take_float(fields, section, "a", lambda x: x > 0,
                            "a > 0 (value 0 at x=0 otherwise)")
            b = _take_float(fields, section, "b", lambda x: x > 0, "b > 0")
            return crm.AffineSqrt(a, b)
        if fn == "indicator_sqrt":
            return crm.IndicatorSqrt(_take_float(fields, section, "b",
                                                 lambda x: x > 0, "b > 0"))
    except ValueError as exc:
        raise ConfigError(f"{section} profile: {exc}")
    raise ConfigError(f"{section}.fn={fn!r} is not one of constant, affine_sqrt, indicator_sqrt")


def _build_kernel(fields: dict) -> kernels.Kernel:
    if "type" not in fields:
        raise ConfigError("missing required key kernel.type")
    ktype, lineno = fields.pop("type")
    try:
        if ktype == "rectangular":
            return kernels.Rectangular(_take_float(fields, "kernel", "tau",
                                                   lambda x: x > 0, "tau > 0"))
        if ktype == "dykstra_laud":
            return kernels.DykstraLaud()
        if ktype == "ornstein_uhlenbeck":
            return kernels.OrnsteinUhlenbeck(_take_float(fields, "kernel", "kappa",
                                                         lambda x: x > 0, "kappa > 0"))
        if ktype == "u_shaped":
            return kernels.UShaped(_take_float(fields, "kernel", "beta",
                                               lambda x: x > 0, "beta > 0"))
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}")
    raise ConfigError(f"line {lineno}: unknown kernel.type {ktype!r}")


def _build_intensity(fields: dict) -> crm.JumpIntensity:
    if "family" not in fields:
        raise ConfigError("missing required key crm.family")
    family, lineno = fields.pop("family")
    try:
        if family == "generalized_gamma":
            sigma = _take_float(fields, "crm", "sigma",
                                lambda x: 0 < x < 1, "sigma in (0,1)")
            gamma = _take_float(fields, "crm", "gamma", lambda x: x > 0, "gamma > 0")
            return crm.GeneralizedGamma(sigma, gamma)
        if family == "extended_gamma":
            return crm.ExtendedGamma(_build_positive_fn(fields, "crm"))
        if family == "beta":
            return crm.Beta(_build_positive_fn(fields, "crm"))
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {exc}")
    raise ConfigError(f"line {lineno}: unknown crm.family {family!r}")


def _parse_rate(value: str, lineno: int):
    # forms: auto | power:<p> | powerlog:<p>,<q>
    if value == "auto":
        return None
    if value.startswith("power:"):
        return Power(_as_float(value[6:], lineno, "experiment.rate"))
    if value.startswith("powerlog:"):
        parts = value[9:].split(",")
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: powerlog rate needs p,q")
        return PowerLog(_as_float(parts[0], lineno, "experiment.rate"),
                        _as_float(parts[1], lineno, "experiment.rate"))
    raise ConfigError(f"line {lineno}: rate must be auto, power:<p> or powerlog:<p>,<q>")


_EXPERIMENT_KEYS = {"kind", "functional", "theorem", "rate", "horizon", "replicates",
                    "seed", "epsilon", "t_grid", "centering", "ks_alpha", "grid_n"}
_OUTPUT_KEYS = {"path", "format"}
_KERNEL_KEYS = {"type", "tau", "kappa", "beta"}
_CRM_KEYS = {"family", "sigma", "gamma", "fn", "value", "a", "b"}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    sections: Dict[str, Dict[str, tuple]] = {s: {} for s in _SECTIONS}
    for lineno, section, key, value in _tokenize(text):
        allowed = {"experiment": _EXPERIMENT_KEYS, "output": _OUTPUT_KEYS,
                   "kernel": _KERNEL_KEYS, "crm": _CRM_KEYS}[section]
        if key not in allowed and not (section == "experiment"
                                       and key.startswith("expect_condition_")):
            raise ConfigError(f"line {lineno}: unknown key {section}.{key}")
        if key in sections[section]:
            raise ConfigError(f"line {lineno}: duplicate key {section}.{key}")
        sections[section][key] = (value, lineno)

    exp = sections["experiment"]
    if "kind" not in exp:
        raise ConfigError("missing required key experiment.kind")
    kind = exp.pop("kind")[0]
    if kind not in _KINDS:
        raise ConfigError(f"experiment.kind must be one of {', '.join(_KINDS)}")
    cfg = RunConfig(kind=kind)

    if "functional" in exp:
        value, lineno = exp.pop("functional")
        try:
            cfg.functional = Functional(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: unknown functional {value!r}")
    if "theorem" in exp:
        value, lineno = exp.pop("theorem")
        if value not in Theorem.ALL:
            raise ConfigError(f"line {lineno}: theorem must be one of {Theorem.ALL}")
        cfg.theorem = value
    if "rate" in exp:
        value, lineno = exp.pop("rate")
        cfg.rate = _parse_rate(value, lineno)
    if "horizon" in exp:
        value, lineno = exp.pop("horizon")
        cfg.horizon = _as_float(value, lineno, "experiment.horizon",
                                lambda x: x > 0, "horizon > 0")
    if "replicates" in exp:
        value, lineno = exp.pop("replicates")
        cfg.replicates = _as_int(value, lineno, "experiment.replicates",
                                 lambda x: x >= 100, "replicates >= 100")
    if "seed" in exp:
        value, lineno = exp.pop("seed")
        cfg.seed = _as_int(value, lineno, "experiment.seed")
    if "epsilon" in exp:
        value, lineno = exp.pop("epsilon")
        cfg.epsilon = _as_float(value, lineno, "experiment.epsilon",
                                lambda x: x > 0, "epsilon > 0")
    if "ks_alpha" in exp:
        value, lineno = exp.pop("ks_alpha")
        cfg.ks_alpha = _as_float(value, lineno, "experiment.ks_alpha",
                                 lambda x: 0 < x < 1, "ks_alpha in (0,1)")
    if "grid_n" in exp:
        value, lineno = exp.pop("grid_n")
        cfg.grid_n = _as_int(value, lineno, "experiment.grid_n",
                             lambda x: x >= 2, "grid_n >= 2")
    if "t_grid" in exp:
        value, lineno = exp.pop("t_grid")
        try:
            grid = tuple(float(p) for p in value.split(","))
        except ValueError:
            raise ConfigError(f"line {lineno}: t_grid must be comma-separated numbers")
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"line {lineno}: t_grid must be >= 4 increasing horizons")
        cfg.t_grid = grid
    if "centering" in exp:
        value, lineno = exp.pop("centering")
        mapping = {"catalog": CENTERING_CATALOG, "quadrature": CENTERING_QUADRATURE}
        if value not in mapping:
            raise ConfigError(f"line {lineno}: centering must be catalog or quadrature")
        cfg.centering = mapping[value]
    for key in list(exp):
        if key.startswith("expect_condition_"):
            value, lineno = exp.pop(key)
            try:
                idx = int(key.rsplit("_", 1)[1])
            except ValueError:
                raise ConfigError(f"line {lineno}: bad condition index in {key}")
            if value not in ("converges_to_positive", "vanishes", "diverges"):
                raise ConfigError(
                    f"line {lineno}: {key} must be converges_to_positive, vanishes or diverges")
            cfg.expects[idx] = value

    if sections["kernel"]:
        cfg.kernel = _build_kernel(dict(sections["kernel"]))
    if sections["crm"]:
        cfg.intensity = _build_intensity(dict(sections["crm"]))

    out = sections["output"]
    if "path" in out:
        cfg.out_path = out.pop("path")[0]
    if "format" in out:
        value, lineno = out.pop("format")
        if value not in ("json", "csv"):
            raise ConfigError(f"line {lineno}: format must be json or csv")
        cfg.out_format = value

    if cfg.kind in ("check-conditions", "simulate", "sample-paths"):
        if cfg.kernel is None:
            raise ConfigError(f"{cfg.kind} requires a [kernel] section")
        if cfg.intensity is None:
            raise ConfigError(f"{cfg.kind} requires a [crm] section")
    return cfg


def _render_kernel(kernel) -> str:
    if isinstance(kernel, kernels.Rectangular):
        return f"type = rectangular\ntau = {kernel.tau:.17g}"
    if isinstance(kernel, kernels.DykstraLaud):
        return "type = dykstra_laud"
    if isinstance(kernel, kernels.OrnsteinUhlenbeck):
        return f"type = ornstein_uhlenbeck\nkappa = {kernel.kappa:.17g}"
    return f"type = u_shaped\nbeta = {kernel.beta_center:.17g}"


def _render_fn(fn) -> str:
    if isinstance(fn, crm.Constant):
        return f"fn = constant\nvalue = {fn.a:.17g}"
    if isinstance(fn, crm.AffineSqrt):
        return f"fn = affine_sqrt\na = {fn.a:.17g}\nb = {fn.b:.17g}"
    return f"fn = indicator_sqrt\nb = {fn.b:.17g}"


def _render_intensity(intensity) -> str:
    if isinstance(intensity, crm.GeneralizedGamma):
        return (f"family = generalized_gamma\nsigma = {intensity.sigma:.17g}\n"
                f"gamma = {intensity.gamma:.17g}")
    if isinstance(intensity, crm.ExtendedGamma):
        return "family = extended_gamma\n" + _render_fn(intensity.beta_fn)
    return "family = beta\n" + _render_fn(intensity.c_fn)


def render_config(cfg: RunConfig) -> str:
    """Serialize a RunConfig; parse_config(render_config(c)) == c."""
    lines = ["[experiment]", f"kind = {cfg.kind}",
             f"functional = {cfg.functional.value}", f"theorem = {cfg.theorem}"]
    if cfg.rate is not None:
        if isinstance(cfg.rate, PowerLog):
            lines.append(f"rate = powerlog:{cfg.rate.p:.17g},{cfg.rate.q:.17g}")
        else:
            lines.append(f"rate = power:{cfg.rate.p:.17g}")
    lines += [f"horizon = {cfg.horizon:.17g}", f"replicates = {cfg.replicates}",
              f"seed = {cfg.seed}", f"epsilon = {cfg.epsilon:.17g}",
              "t_grid = " + ",".join(f"{t:.17g}" for t in cfg.t_grid),
              "centering = " + ("catalog" if cfg.centering == CENTERING_CATALOG
                                else "quadrature"),
              f"ks_alpha = {cfg.ks_alpha:.17g}", f"grid_n = {cfg.grid_n}"]
    for idx in sorted(cfg.expects):
        lines.append(f"expect_condition_{idx} = {cfg.expects[idx]}")
    if cfg.kernel is not None:
        lines += ["", "[kernel]", _render_kernel(cfg.kernel)]
    if cfg.intensity is not None:
        lines += ["", "[crm]", _render_intensity(cfg.intensity)]
    lines += ["", "[output]"]
    if cfg.out_path:
        lines.append(f"path = {cfg.out_path}")
    lines.append(f"format = {cfg.out_format}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _provenance(cfg: RunConfig) -> str:
    echo = " ; ".join(line for line in render_config(cfg).splitlines() if line)
    return f"# hazardlab {__version__} | seed={cfg.seed} | config: {echo}\n"


def _write(cfg: RunConfig, body: str, default_name: str) -> str:
    path = cfg.out_path or default_name
    with open(path, "w") as fh:
        fh.write(_provenance(cfg))
        fh.write(body)
    return path


def _auto_rate(cfg: RunConfig):
    from .asymptotics import regime_cumhaz
    if cfg.rate is not None:
        return cfg.rate
    if cfg.theorem == Theorem.CUMHAZ:
        return regime_cumhaz(cfg.kernel, cfg.intensity).rate
    return Power(0.5)       # C1 = sqrt(T), the quadratic-functional convention


def run(cfg: RunConfig) -> int:
    """Dispatch a parsed configuration; returns the process exit status."""
    try:
        if cfg.kind == "regimes":
            pairs = None
            if cfg.kernel is not None and cfg.intensity is not None:
                pairs = [(cfg.kernel, cfg.intensity)]
            rows = catalog_rows(pairs)
            if cfg.out_format == "csv":
                cols = ["kernel", "crm", "functional", "rate", "trend",
                        "variance", "delta", "supported"]
                body = ",".join(cols) + "\n" + "\n".join(
                    ",".join(str(r[c]) for c in cols) for r in rows) + "\n"
                path = _write(cfg, body, "regimes.csv")
            else:
                path = _write(cfg, json.dumps(rows, indent=2) + "\n", "regimes.json")
            print(f"wrote {path} ({len(rows)} rows)")
            return 0

        if cfg.kind == "check-conditions":
            report = check_theorem(cfg.kernel, cfg.intensity, cfg.theorem,
                                   _auto_rate(cfg), cfg.t_grid)
            body = report.to_csv_text() if cfg.out_format == "csv" else report.to_json() + "\n"
            path = _write(cfg, body, f"conditions_{cfg.theorem}.{cfg.out_format}")
            status = 0
            for idx, expected in sorted(cfg.expects.items()):
                got = report.verdicts.get(idx)
                ok = got is not None and got.kind == expected
                print(f"condition {idx}: expected {expected}, got "
                      f"{got.kind if got else 'absent'}{'' if ok else '  <-- MISMATCH'}")
                if not ok:
                    status = 2
            print(f"wrote {path}")
            return status

        if cfg.kind == "simulate":
            config = ExperimentConfig(
                kernel=cfg.kernel, intensity=cfg.intensity, functional=cfg.functional,
                horizon=cfg.horizon, replicates=cfg.replicates, seed=cfg.seed,
                epsilon=cfg.epsilon, centering_mode=cfg.centering)
            report = run_clt(config)
            if cfg.out_format == "csv":
                path = _write(cfg, report.samples_csv_text(), "simulate.csv")
            else:
                path = _write(cfg, report.to_json() + "\n", "simulate.json")
            print(f"wrote {path}: ks_p={report.ks_p_value:.4g} "
                  f"variance_ratio={report.variance_ratio:.4g}")
            return 0 if report.ks_p_value >= cfg.ks_alpha else 2

        if cfg.kind == "sample-paths":
            config = ExperimentConfig(
                kernel=cfg.kernel, intensity=cfg.intensity, functional=cfg.functional,
                horizon=cfg.horizon, replicates=100, seed=cfg.seed,
                epsilon=cfg.epsilon, centering_mode=cfg.centering)
            sample = sample_crm(config, 0)
            ts = np.linspace(0.0, cfg.horizon, cfg.grid_n)
            hs = hazard_path(sample, cfg.kernel, ts)
            body = "t,hazard\n" + "\n".join(
                f"{t:.17g},{h:.17g}" for t, h in zip(ts, hs)) + "\n"
            path = _write(cfg, body, "paths.csv")
            print(f"wrote {path} ({sample.size} atoms)")
            return 0
        raise ConfigError(f"unknown kind {cfg.kind!r}")
    except (OSError, ConfigError, ValueError, crm.EnvelopeError,
            kernels.UnsupportedRegimeError, NotCatalogedError,
            TruncationBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _load(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hazardlab",
        description="simulation and asymptotic verification of CRM-driven random hazard rates")
    sub = parser.add_subparsers(dest="command", required=True)

    p_reg = sub.add_parser("regimes", help="dump the regime catalog")
    p_reg.add_argument("--config", default=None)
    p_reg.add_argument("--out", default=None)
    p_reg.add_argument("--format", choices=("csv", "json"), default=None)

    for name in ("check-conditions", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)

    p_paths = sub.add_parser("sample-paths")
    p_paths.add_argument("--config", required=True)
    p_paths.add_argument("--grid", type=int, default=None)
    p_paths.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.config:
            cfg = _load(args.config)
        else:
            cfg = RunConfig(kind="regimes", out_format="csv")
        if cfg.kind != args.command:
            # the subcommand wins; config kind must agree when both given
            if args.config:
                print(f"error: config kind={cfg.kind!r} does not match "
                      f"subcommand {args.command!r}", file=sys.stderr)
                return 1
            cfg.kind = args.command
        if getattr(args, "out", None):
            cfg.out_path = args.out
        if getattr(args, "format", None):
            cfg.out_format = args.format
        if getattr(args, "grid", None):
            cfg.grid_n = args.grid
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
