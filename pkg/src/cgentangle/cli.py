"""``cge``: reproducible scenario runner with CSV/JSON output.

Each scenario reads typed parameters from an optional ``key = value``
config file, then ``--set key=value`` overrides, and produces a table of
rows plus pass/fail verdicts.  Exit codes: 0 all pass, 1 a verdict
failed, 2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .coarse_grain import (
    ModeFamily,
    analytic_overlap,
    commutator_matrix,
    reduced_cg_covariance,
)
from .fock import (
    FockBasis,
    bound_check,
    dim_bounded,
    dim_exact,
    maximal_entropy_state,
    random_state,
    reduced_entropy,
    singlet_state,
)
from .gaussian import NotAQuantumStateError, covariance_entropy, symplectic_spectrum
from .lattice import LatticeModel, vacuum_covariance
from .newton_wigner import (
    QuadratureError,
    convergence_metrics,
    gaussian_wavepacket,
    nw_sampling_fidelity,
    one_particle_localization_fidelity,
)

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


_PARSERS: dict[type | str, Callable[[str], Any]] = {
    int: int,
    float: float,
    "floats": _float_list,
    "ints": _int_list,
}


@dataclass
class Scenario:
    name: str
    func: Callable[[dict], tuple[list[dict], dict]]
    params: dict[str, tuple[Any, Any]]
    help: str = ""
    entropy_columns: tuple[str, ...] = ()


SCENARIOS: dict[str, Scenario] = {}


def scenario(name, params, help="", entropy_columns=()):
    def register(func):
        SCENARIOS[name] = Scenario(name, func, params, help, tuple(entropy_columns))
        return func

    return register


def _verdict(value, threshold, passed, **extra) -> dict:
    out = {"value": value, "threshold": threshold, "pass": bool(passed)}
    out.update(extra)
    return out


def _strictly_decreasing(values) -> bool:
    return bool(np.all(np.diff(values) < 0))


@scenario(
    "vacuum-scaling",
    {
        "num_sites": (int, 512),
        "mass": (float, 0.0),
        "mass_regulator": (float, 1e-6),
        "lengths": ("ints", [8, 16, 32, 64]),
        "slope_tolerance": (float, 0.05),
        "rms_tolerance": (float, 0.02),
    },
    help="interval entropy of the near-massless vacuum against (1/3) ln(chord length)",
    entropy_columns=("entropy_nats",),
)
def _vacuum_scaling(p):
    model = LatticeModel(p["num_sites"], p["mass"], mass_regulator=p["mass_regulator"])
    cov = vacuum_covariance(model)
    n = p["num_sites"]
    rows = []
    for L in p["lengths"]:
        if not 0 < L < n:
            raise ConfigError(f"lengths: interval {L} must lie strictly between 0 and num_sites")
        chord = (n / math.pi) * math.sin(math.pi * L / n)
        rows.append({"length": L, "log_chord": math.log(chord),
                     "entropy_nats": covariance_entropy(cov, range(L))})
    x = np.array([r["log_chord"] for r in rows])
    y = np.array([r["entropy_nats"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    lo, hi = (1 - p["slope_tolerance"]) / 3, (1 + p["slope_tolerance"]) / 3
    verdicts = {
        "slope": _verdict(float(slope), [lo, hi], lo <= slope <= hi, intercept=float(intercept)),
        "residual_rms": _verdict(rms, p["rms_tolerance"], rms < p["rms_tolerance"]),
    }
    return rows, verdicts


@scenario(
    "massive-saturation",
    {
        "num_sites": (int, 512),
        "mass": (float, 0.5),
        "lengths": ("ints", [8, 16, 32, 64]),
        "compare": ("ints", [32, 64]),
        "tolerance": (float, 1e-3),
    },
    help="interval entropy of a massive vacuum stops growing with interval size",
    entropy_columns=("entropy_nats",),
)
def _massive_saturation(p):
    model = LatticeModel(p["num_sites"], p["mass"])
    cov = vacuum_covariance(model)
    rows = [{"length": L, "entropy_nats": covariance_entropy(cov, range(L))} for L in p["lengths"]]
    if len(p["compare"]) != 2:
        raise ConfigError("compare: expected exactly two interval lengths")
    a, b = (covariance_entropy(cov, range(L)) for L in p["compare"])
    change = abs(b - a)
    return rows, {"saturation": _verdict(change, p["tolerance"], change < p["tolerance"])}


@scenario(
    "commutators",
    {
        "num_sites": (int, 512),
        "epsilon": (float, 4.0),
        "separation_ratio": (float, 10.0),
        "modes": (int, 8),
        "diagonal_tolerance": (float, 1e-10),
        "relative_tolerance": (float, 0.05),
    },
    help="coarse-grained commutator matrix against the analytic Gaussian overlap",
)
def _commutators(p):
    model = LatticeModel(p["num_sites"], 1.0)
    family = ModeFamily(p["modes"], p["separation_ratio"] * p["epsilon"], p["epsilon"])
    comm = commutator_matrix(family, model)
    exact = analytic_overlap(family)
    rows = []
    for lag in range(1, p["modes"]):
        entries = np.diagonal(comm, offset=lag)
        rows.append({"lag": lag, "max_entry": float(np.max(np.abs(entries))),
                     "analytic": float(exact[0, lag])})
    diag_err = float(np.max(np.abs(np.diag(comm) - 1)))
    off = comm - np.diag(np.diag(comm))
    max_off = float(np.max(np.abs(off))) if p["modes"] > 1 else 0.0
    expected = float(np.exp(-p["separation_ratio"] ** 2 / 8)) if p["modes"] > 1 else 0.0
    rel = abs(max_off - expected) / expected if expected else 0.0
    verdicts = {
        "diagonal": _verdict(diag_err, p["diagonal_tolerance"], diag_err <= p["diagonal_tolerance"]),
        "max_offdiagonal": _verdict(max_off, expected, rel <= p["relative_tolerance"], relative_error=rel),
        "approximately_canonical": _verdict(family.neighbour_overlap, 1e-4, family.approximately_canonical),
    }
    return rows, verdicts


@scenario(
    "cg-purity",
    {
        "num_sites": (int, 256),
        "epsilon": (float, 8.0),
        "mass_eps": ("floats", [0.5, 1.0, 2.0, 4.0, 8.0]),
        "check_mass_eps": (float, 10.0),
        "purity_tolerance": (float, 1e-2),
    },
    help="single coarse-grained mode of the vacuum becomes pure as m*eps grows",
    entropy_columns=("entropy_nats",),
)
def _cg_purity(p):
    eps = p["epsilon"]

    def nu_of(mu):
        model = LatticeModel(p["num_sites"], mu / eps)
        family = ModeFamily(1, eps, eps, origin=p["num_sites"] // 2)
        cov = reduced_cg_covariance(family, model, orthonormalize=True)
        nu = float(symplectic_spectrum(cov).values[0])
        return nu, covariance_entropy(cov)

    rows = []
    for mu in p["mass_eps"]:
        nu, s = nu_of(mu)
        rows.append({"mass_eps": mu, "nu": nu, "excess": nu - 0.5, "entropy_nats": s})
    nu_check, _ = nu_of(p["check_mass_eps"])
    nus = [r["nu"] for r in rows]
    verdicts = {
        "strictly_decreasing": _verdict(nus, None, _strictly_decreasing(nus)),
        "purity_at_check": _verdict(nu_check - 0.5, p["purity_tolerance"],
                                    nu_check - 0.5 < p["purity_tolerance"],
                                    mass_eps=p["check_mass_eps"]),
    }
    return rows, verdicts


@scenario(
    "nw-convergence",
    {
        "epsilon": (float, 1.0),
        "mass_eps": ("floats", [0.5, 1.0, 2.0, 4.0, 8.0, 16.0]),
        "ratio_threshold": (float, 1e-2),
        "distance_threshold": (float, 1e-2),
        "scaling_tolerance": (float, 1e-8),
    },
    help="|f-|/|f+| and |f+ - G|/|G| vanish as m*eps grows",
)
def _nw_convergence(p):
    eps = p["epsilon"]
    rows, scaling = [], 0.0
    for mu in p["mass_eps"]:
        m = convergence_metrics(eps, mu / eps)
        twin = convergence_metrics(2 * eps, mu / (2 * eps))
        scaling = max(scaling, abs(m.ratio - twin.ratio), abs(m.gauss_distance - twin.gauss_distance))
        rows.append({"mass_eps": mu, "ratio": m.ratio, "gauss_distance": m.gauss_distance})
    last = rows[-1]
    ratios = [r["ratio"] for r in rows]
    verdicts = {
        "ratio_strictly_decreasing": _verdict(ratios, None, _strictly_decreasing(ratios)),
        "ratio_at_largest": _verdict(last["ratio"], p["ratio_threshold"], last["ratio"] < p["ratio_threshold"]),
        "distance_at_largest": _verdict(last["gauss_distance"], p["distance_threshold"],
                                        last["gauss_distance"] < p["distance_threshold"]),
        "scaling_invariance": _verdict(scaling, p["scaling_tolerance"], scaling <= p["scaling_tolerance"]),
    }
    return rows, verdicts


@scenario(
    "localization-fidelity",
    {
        "epsilon": (float, 1.0),
        "modes": (int, 64),
        "separation_ratio": (float, 0.5),
        "width_ratio": (float, 3.0),
        "mass_eps": ("floats", [0.2, 10.0]),
        "high_mass_eps": (float, 10.0),
        "low_mass_eps": (float, 0.2),
        "threshold": (float, 0.99),
    },
    help="one-particle packet against its detector-mode sampling",
)
def _localization(p):
    eps = p["epsilon"]
    family = ModeFamily(p["modes"], p["separation_ratio"] * eps, eps)
    packet = gaussian_wavepacket(float(family.centers.mean()), p["width_ratio"] * eps)

    def both(mu):
        return (one_particle_localization_fidelity(packet, family, mu / eps),
                nw_sampling_fidelity(packet, family, mu / eps))

    rows = []
    for mu in p["mass_eps"]:
        fid, nw_fid = both(mu)
        rows.append({"mass_eps": mu, "fidelity": fid, "nw_infidelity": 1 - nw_fid})
    high, _ = both(p["high_mass_eps"])
    low, _ = both(p["low_mass_eps"])
    verdicts = {
        "fidelity_at_high": _verdict(high, p["threshold"], high > p["threshold"], mass_eps=p["high_mass_eps"]),
        "lower_at_low": _verdict(low, high, low < high, mass_eps=p["low_mass_eps"]),
    }
    return rows, verdicts


@scenario(
    "singlet",
    {"modes": (int, 2), "site_i": (int, 0), "site_j": (int, 1), "tolerance": (float, 1e-10)},
    help="spin singlet of two localized excitations has ln 2 entropy per site",
    entropy_columns=("entropy_nats", "expected_nats"),
)
def _singlet(p):
    basis = FockBasis(p["modes"], 2, spin=True)
    state = singlet_state(p["site_i"], p["site_j"], basis)
    rows = []
    for site in (p["site_i"], p["site_j"]):
        s = reduced_entropy(state, [site])
        rows.append({"site": site, "entropy_nats": s, "expected_nats": math.log(2),
                     "pass": abs(s - math.log(2)) <= p["tolerance"]})
    worst = max(abs(r["entropy_nats"] - math.log(2)) for r in rows)
    return rows, {"ln2": _verdict(worst, p["tolerance"], worst <= p["tolerance"])}


@scenario(
    "bounds",
    {
        "modes": (int, 4),
        "max_total": (int, 2),
        "trials": (int, 1000),
        "dim_max_modes": (int, 64),
        "dim_max_particles": (int, 6),
        "asymptotic_modes": (int, 1000),
        "asymptotic_particles": (int, 2),
        "asymptotic_tolerance": (float, 0.15),
        "witness_modes": (int, 2),
        "witness_particles": (int, 2),
    },
    help="entanglement entropy never exceeds ln D over random states",
    entropy_columns=("entropy_nats", "bound_nats"),
)
def _bounds(p):
    rng = np.random.default_rng(p["seed"])
    basis = FockBasis(p["modes"], p["max_total"])
    rows, all_ok = [], True
    for t in range(p["trials"]):
        state = random_state(basis, rng)
        size = int(rng.integers(1, p["modes"]))
        subset = sorted(int(v) for v in rng.choice(p["modes"], size=size, replace=False))
        check = bound_check(state, subset)
        all_ok &= check.satisfied
        rows.append({"trial": t, "subset_size": size, "entropy_nats": check.entropy,
                     "bound_nats": check.bound, "satisfied": check.satisfied})
    dims_ok = all(
        sum(dim_exact(M, n) for n in range(N + 1)) == dim_bounded(M, N)
        for M in range(1, p["dim_max_modes"] + 1)
        for N in range(p["dim_max_particles"] + 1)
    )
    M, N = p["asymptotic_modes"], p["asymptotic_particles"]
    rel = abs(math.log(dim_bounded(M, N)) - N * math.log(M)) / (N * math.log(M))
    witness, subset = maximal_entropy_state(p["witness_modes"], p["witness_particles"])
    w = bound_check(witness, subset, max_particles=p["witness_particles"])
    verdicts = {
        "bound_universal": _verdict(p["trials"], None, all_ok),
        "dimension_identities": _verdict(None, None, dims_ok),
        "asymptotic_log_dimension": _verdict(rel, p["asymptotic_tolerance"], rel <= p["asymptotic_tolerance"]),
        "saturation_witness": _verdict(abs(w.entropy - w.bound), 1e-9, abs(w.entropy - w.bound) <= 1e-9),
    }
    return rows, verdicts


# ---------------------------------------------------------------- config


def parse_config_text(text: str, schema: dict, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, value, schema, f"{source}:{lineno}")
    return values


def _coerce(key, value, schema, where):
    if key not in schema:
        raise ConfigError(f"{where}: unknown key {key!r} (allowed: {', '.join(sorted(schema))})")
    kind = schema[key][0]
    try:
        return _PARSERS[kind](value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {value!r} ({exc})") from None


def resolve_parameters(name: str, config_text: str | None = None, overrides=(), seed=None) -> dict:
    sc = SCENARIOS[name]
    schema = dict(sc.params)
    schema["seed"] = (int, 0)
    params = {k: v[1] for k, v in schema.items()}
    if config_text:
        params.update(parse_config_text(config_text, schema))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set: expected key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        params[key] = _coerce(key, value, schema, "--set")
    if seed is not None:
        params["seed"] = seed
    if not 0 <= params["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return params


# ---------------------------------------------------------------- report


@dataclass
class RunReport:
    scenario: str
    parameters: dict
    rows: list[dict]
    verdicts: dict
    wall_time_s: float = 0.0
    started: str = ""
    version: str = __version__
    units: str = "nats"
    columns: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "version": self.version,
            "parameters": self.parameters,
            "units": self.units,
            "columns": self.columns,
            "rows": self.rows,
            "verdicts": self.verdicts,
            "passed": self.passed,
            "timestamp": {"started": self.started, "wall_time_s": self.wall_time_s},
        }


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def run(name: str, params: dict, bits: bool = False) -> RunReport:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}")
    sc = SCENARIOS[name]
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    rows, verdicts = sc.func(params)
    elapsed = time.perf_counter() - t0
    rows = [_jsonable(r) for r in rows]
    columns = list(rows[0]) if rows else []
    if bits:
        rows = [_to_bits(r, sc.entropy_columns) for r in rows]
        columns = [_bits_name(c, sc.entropy_columns) for c in columns]
    return RunReport(
        scenario=name,
        parameters=_jsonable(params),
        rows=rows,
        verdicts=_jsonable(verdicts),
        wall_time_s=elapsed,
        started=started,
        units="bits" if bits else "nats",
        columns=columns,
    )


def _bits_name(col, entropy_columns):
    return col.replace("_nats", "_bits") if col in entropy_columns else col


def _to_bits(row, entropy_columns):
    return {
        _bits_name(k, entropy_columns): (v / math.log(2) if k in entropy_columns else v)
        for k, v in row.items()
    }


def format_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if v != 0 and abs(v) < 1e-3:
            return f"{v:.17e}"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def emit_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([format_cell(row[c]) for c in report.columns])
    return buf.getvalue()


def emit_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=True) + "\n"


def emit(report: RunReport, fmt: str, out: str | Path | None = None) -> str:
    if fmt == "csv":
        text = emit_csv(report)
    elif fmt == "json":
        text = emit_json(report)
    else:
        raise ConfigError(f"unknown format {fmt!r}")
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cge",
        description="Coarse-grained entanglement scenarios for a 1D Klein-Gordon field.",
    )
    parser.add_argument("scenario", choices=sorted(SCENARIOS))
    parser.add_argument("--config", type=Path, help="key = value parameter file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one parameter (repeatable)")
    parser.add_argument("--out", type=Path, help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="json")
    parser.add_argument("--bits", action="store_true", help="report entropies in bits")
    parser.add_argument("--seed", type=int, help="seed for randomized scenarios")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        config_text = args.config.read_text(encoding="utf-8") if args.config else None
        params = resolve_parameters(args.scenario, config_text, args.overrides, args.seed)
        report = run(args.scenario, params, bits=args.bits)
        text = emit(report, args.format, args.out)
    except (QuadratureError, NotAQuantumStateError) as exc:
        print(f"cge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, IndexError, OSError) as exc:
        print(f"cge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out is None:
        sys.stdout.write(text)
    for key, v in report.verdicts.items():
        print(f"{'PASS' if v['pass'] else 'FAIL'} {args.scenario}:{key}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
