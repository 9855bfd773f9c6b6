"""Command-line driver.

Subcommands: certify, witness, spectrum, ratio, sff. Exit status is 0 on
success, 1 when a computation is refused or an output check fails, and 2
on usage errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import mpmath
import numpy as np

from . import levelstats as ls
from . import sff
from .certify import (
    HarmonicSet,
    Witness,
    certify,
    paper_counterexample,
    proper_divisor_orders,
    verify_witness_exact,
    verify_witness_numeric,
)
from .cyclotomic import IntPoly, is_prime
from .model import (
    DEFAULT_GAMMA,
    DEFAULT_PRECISION,
    Harmonic,
    ModelParams,
    SpectrumTooLarge,
    default_harmonic,
    dispersion,
    many_body_spectrum,
    write_spectrum,
)

PAPER_MEAN_RATIO_L23 = 0.36936

RATIO_SCHEMA = ("k", "r")
HIST_SCHEMA = ("bin_lo", "bin_hi", "density", "poisson")
SFF_SCHEMA = ("q", "L", "estimate", "std_error", "exact_free", "paper_free", "poisson", "tau",
              "n_samples", "seed")

COMMANDS = ("certify", "witness", "spectrum", "ratio", "sff")


class UsageError(Exception):
    exit_code = 2


class ComputationRefused(Exception):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    command: str
    L: int
    orders: tuple[int, ...] = (1,)
    couplings: dict = field(default_factory=dict)
    gamma: str = DEFAULT_GAMMA
    precision_digits: int = DEFAULT_PRECISION
    include_constant: bool = True
    bins: int = 50
    policy: str = ls.DegeneratePolicy.CONVENTION.value
    q: int = 1
    t0: float = 0.0
    tau: float = 1e5
    n_samples: int = 1_000_000
    seed: int = 0
    tolerance: float = 1e-20
    output: Optional[str] = None
    format: str = "json"

    def params(self) -> ModelParams:
        harmonics = []
        for d in self.orders:
            h = default_harmonic(d)
            if d in self.couplings:
                h = Harmonic(d, *self.couplings[d])
            harmonics.append(h)
        return ModelParams(self.L, tuple(harmonics), self.gamma, self.precision_digits)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["orders"] = list(self.orders)
        out["couplings"] = {str(d): list(v) for d, v in sorted(self.couplings.items())}
        return out

    def output_path(self) -> Path:
        if self.output:
            return Path(self.output)
        ext = {"json": ".json", "csv": ".csv", "fspc": ".fspc"}[self.format]
        return Path(f"{self.command}_L{self.L}{ext}")


def _common(p: argparse.ArgumentParser, formats: Sequence[str]) -> None:
    p.add_argument("--L", type=int, required=True, help="number of lattice sites")
    p.add_argument("--orders", default="1",
                   help="comma-separated hopping ranges, or 'divisors' for all proper divisors of L")
    p.add_argument("--coupling", action="append", default=[], metavar="D:ALPHA:BETA",
                   help="couplings for range D (e.g. 2:cbrt(5):0.3); repeatable")
    p.add_argument("--gamma", default=DEFAULT_GAMMA, help="chemical potential")
    p.add_argument("--precision", type=int, default=DEFAULT_PRECISION, dest="precision_digits",
                   help="decimal digits for the mode energies")
    p.add_argument("--output", help="output file")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="freefermion", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("certify", "witness"):
        p = sub.add_parser(name, help=f"{name} rational independence of the dispersion")
        _common(p, ("json",))
        p.add_argument("--no-constant", dest="include_constant", action="store_false",
                       help="drop the P(1)=0 condition (gamma treated as zero)")
        p.add_argument("--tol", type=float, default=1e-20, dest="tolerance",
                       help="advisory bound on the numeric witness residual")

    p = sub.add_parser("spectrum", help="dump the sorted many-body spectrum")
    _common(p, ("fspc",))

    p = sub.add_parser("ratio", help="gap-ratio statistics of the many-body spectrum")
    _common(p, ("csv", "json"))
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--policy", choices=[x.value for x in ls.DegeneratePolicy],
                   default=ls.DegeneratePolicy.CONVENTION.value)

    p = sub.add_parser("sff", help="Monte Carlo spectral form factor moment")
    _common(p, ("csv", "json"))
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=1e5)
    p.add_argument("--n-samples", type=int, default=1_000_000, dest="n_samples")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _read_config(path: str) -> list[str]:
    tokens = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if key in ("L", "l"):
            flag = "--L"
        if flag == "--no-constant":
            if value.lower() in ("1", "true", "yes"):
                tokens.append(flag)
            continue
        tokens += [flag, value]
    return tokens


def _split_config(argv: list[str]) -> tuple[Optional[str], list[str]]:
    rest, path = [], None
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            path = next(it, None)
            if path is None:
                raise UsageError("--config requires a path")
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            rest.append(tok)
    return path, rest


def _parse_orders(text: str, L: int) -> tuple[int, ...]:
    if text.strip() == "divisors":
        return tuple(sorted(proper_divisor_orders(L)))
    try:
        orders = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError as exc:
        raise UsageError(f"bad --orders {text!r}") from exc
    return tuple(orders)


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg_path, argv = _split_config(argv)
    if cfg_path is not None:
        cmd_at = next((i for i, t in enumerate(argv) if t in COMMANDS), None)
        if cmd_at is None:
            raise UsageError("a subcommand is required")
        # config values go first so later flags override them
        argv = argv[: cmd_at + 1] + _read_config(cfg_path) + argv[cmd_at + 1:]
    ns = build_parser().parse_args(argv)
    values = vars(ns)
    values.pop("config", None)
    raw_couplings = values.pop("coupling")
    L = values["L"]
    if L < 2:
        raise UsageError(f"--L must be >= 2, got {L}")

    couplings = {}
    for item in raw_couplings:
        parts = item.split(":")
        if len(parts) != 3:
            raise UsageError(f"--coupling expects D:ALPHA:BETA, got {item!r}")
        try:
            d = int(parts[0])
        except ValueError as exc:
            raise UsageError(f"bad coupling order in {item!r}") from exc
        couplings[d] = (parts[1], parts[2])
    orders = tuple(sorted(set(_parse_orders(values["orders"], L)) | set(couplings)))
    if not orders:
        raise UsageError("at least one harmonic order is required")
    bad = [d for d in orders if not 1 <= d < L]
    if bad:
        raise UsageError(f"harmonic orders {bad} outside [1, {L})")
    values["orders"] = orders
    values["couplings"] = couplings

    checks = [
        (values["precision_digits"] >= 30, "--precision must be >= 30"),
        (values.get("bins", 1) >= 1, "--bins must be >= 1"),
        (0 <= values.get("q", 1) <= sff.MAX_SOLUTION_Q, f"--q must lie in [0, {sff.MAX_SOLUTION_Q}]"),
        (values.get("tau", 1.0) > 0 and math.isfinite(values.get("tau", 1.0)), "--tau must be positive"),
        (math.isfinite(values.get("t0", 0.0)), "--t0 must be finite"),
        (values.get("n_samples", 1) >= 1, "--n-samples must be >= 1"),
        (values.get("tolerance", 1.0) > 0, "--tol must be positive"),
        (values.get("seed", 0) >= 0, "--seed must be non-negative"),
    ]
    for ok, msg in checks:
        if not ok:
            raise UsageError(msg)
    try:
        config = RunConfig(**values)
        config.params()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return config


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def write_csv(rows: Iterable[Sequence], schema: Sequence[str], path, config: Optional[dict] = None,
              chunk: int = 1 << 16) -> None:
    """UTF-8 CSV with an optional ``# config:`` comment line and a header row."""
    width = len(schema)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fh.write(",".join(schema) + "\n")
        buf = []
        for row in rows:
            if len(row) != width:
                raise ValueError(f"row has {len(row)} fields, schema has {width}")
            buf.append(",".join(_fmt(v) for v in row))
            if len(buf) >= chunk:
                fh.write("\n".join(buf) + "\n")
                buf.clear()
        if buf:
            fh.write("\n".join(buf) + "\n")


def write_json(record: dict, path) -> None:
    """JSON in insertion order, UTF-8, trailing newline."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _residual_str(a, spectrum) -> str:
    return mpmath.nstr(verify_witness_numeric(a, spectrum), 8)


def _certificate_record(config: RunConfig) -> dict:
    params = config.params()
    h = HarmonicSet(config.L, frozenset(config.orders), config.include_constant)
    verdict = certify(h)
    record = {
        "L": config.L,
        "orders": list(config.orders),
        "include_constant": config.include_constant,
        "verdict": "independent" if verdict.independent else "dependent",
        "required_orders": sorted(verdict.required_orders),
        "degree_sum": verdict.degree_sum,
        "bound": config.L,
    }
    if isinstance(verdict, Witness):
        sp = dispersion(params)
        record["witness"] = [str(c) for c in verdict.coeffs]
        record["numeric_residual"] = _residual_str(verdict.coeffs, sp)
    record["couplings"] = params.couplings()
    return record


def _check_witness(coeffs: Sequence[str], h: HarmonicSet) -> None:
    poly = IntPoly(int(c) for c in coeffs)
    if poly.is_zero or not verify_witness_exact(poly, h):
        raise ComputationRefused("emitted witness failed exact re-verification")


def _run_certify(config: RunConfig) -> str:
    record = _certificate_record(config)
    h = HarmonicSet(config.L, frozenset(config.orders), config.include_constant)
    if config.command == "witness":
        if "witness" in record:
            _check_witness(record["witness"], h)
            record["residual_below_tolerance"] = (
                mpmath.mpf(record["numeric_residual"]) < config.tolerance)
        if config.orders == (1,) and config.L >= 4 and not is_prime(config.L):
            sp = dispersion(config.params())
            poly = paper_counterexample(config.L)
            coeffs = [str(c) for c in poly.padded(config.L)]
            _check_witness(coeffs, h)
            record["counterexample"] = {
                "coefficients": coeffs,
                "numeric_residual": _residual_str(poly.padded(config.L), sp),
            }
    record["config"] = config.as_dict()
    path = config.output_path()
    write_json(record, path)
    extra = f", witness degree {record['degree_sum']}" if "witness" in record else ""
    return f"L={config.L} orders={list(config.orders)}: {record['verdict']}{extra} -> {path}"


def _run_spectrum(config: RunConfig) -> str:
    mb = many_body_spectrum(dispersion(config.params()))
    path = config.output_path()
    write_spectrum(mb, path)
    summary = {
        "L": mb.L,
        "n_levels": len(mb),
        "min": float(mb.energies[0]),
        "max": float(mb.energies[-1]),
        "degeneracy_threshold": mb.degeneracy_threshold,
        "couplings": config.params().couplings(),
        "config": config.as_dict(),
    }
    write_json(summary, path.with_name(path.name + ".json"))
    return f"L={mb.L}: {len(mb)} levels in [{mb.energies[0]:.6g}, {mb.energies[-1]:.6g}] -> {path}"


def _run_ratio(config: RunConfig) -> str:
    params = config.params()
    mb = many_body_spectrum(dispersion(params))
    report = ls.ratio_report(mb, config.policy)
    hist = ls.histogram(report.ratios, config.bins)
    summary = {"L": report.L, "couplings": params.couplings()}
    summary.update({k: v for k, v in report.summary().items() if k != "L"})
    summary["poisson_mean_r"] = ls.POISSON_MEAN_RATIO
    summary["reference_mean_r_L23"] = PAPER_MEAN_RATIO_L23
    summary["histogram_sup_distance"] = hist.sup_distance()
    summary["config"] = config.as_dict()
    path = config.output_path()
    if config.format == "json":
        summary["histogram"] = {
            "bin_edges": hist.bin_edges.tolist(),
            "densities": hist.densities.tolist(),
            "poisson": hist.reference_densities.tolist(),
        }
        write_json(summary, path)
    else:
        cfg = config.as_dict()
        write_csv(zip(range(1, report.ratios.size + 1), report.ratios.tolist()), RATIO_SCHEMA,
                  path, cfg)
        stem = path.with_suffix("")
        write_csv(zip(hist.bin_edges[:-1].tolist(), hist.bin_edges[1:].tolist(),
                      hist.densities.tolist(), hist.reference_densities.tolist()),
                  HIST_SCHEMA, stem.with_name(stem.name + ".hist.csv"), cfg)
        write_json(summary, stem.with_name(stem.name + ".summary.json"))
    return f"L={report.L}: <r> = {report.mean_r:.5f} over {report.ratios.size} ratios -> {path}"


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _run_sff(config: RunConfig) -> str:
    sp = dispersion(config.params())
    rep = sff.moment_estimate(sp, config.q, config.t0, config.tau, config.n_samples, config.seed)
    refs = rep.references
    path = config.output_path()
    if config.format == "csv":
        row = (rep.q, rep.L, rep.estimate, rep.std_error, refs["exact_free"], refs["paper_free"],
               refs["poisson"], rep.tau, rep.n_samples, rep.seed)
        write_csv([row], SFF_SCHEMA, path, config.as_dict())
    else:
        record = {
            "q": rep.q, "L": rep.L, "estimate": rep.estimate, "std_error": rep.std_error,
            "tau": rep.tau, "n_samples": rep.n_samples, "t0": rep.t0, "seed": rep.seed,
            "references": {k: str(v) for k, v in refs.items()},
            "sigma_from": {k: _finite_or_none(rep.deviation_sigma(k)) for k in refs},
            "couplings": config.params().couplings(),
            "config": config.as_dict(),
        }
        write_json(record, path)
    return (f"L={rep.L} q={rep.q}: K_q = {rep.estimate:.6g} +- {rep.std_error:.2g} "
            f"(exact {refs['exact_free']}) -> {path}")


_DISPATCH = {
    "certify": _run_certify,
    "witness": _run_certify,
    "spectrum": _run_spectrum,
    "ratio": _run_ratio,
    "sff": _run_sff,
}


def run(config: RunConfig) -> int:
    try:
        print(_DISPATCH[config.command](config))
    except (SpectrumTooLarge, ComputationRefused, OSError) as exc:
        print(f"freefermion: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return exc.exit_code
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
