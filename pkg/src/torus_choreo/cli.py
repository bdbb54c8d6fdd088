"""Command-line front end: ``info``, ``solve``, ``prove``, ``table``, ``export``.

Exit codes: 0 verified (or success), 1 validation failed, 2 numerical stage
failed, 3 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import choreography as ch
from .problem import ProblemParams, ResonanceKind, check_resonance, compute_s1
from .solver import (
    NewtonSettings,
    Seed,
    SolverError,
    data_path,
    seed_bundled_trefoil,
    seed_from_file,
    seed_initial_conditions,
    seed_lyapunov,
    solve,
    write_state,
)
from .validator import DEFAULT_R_STAR, ValidationError, validate

log = logging.getLogger("torus_choreo")

EXIT_OK, EXIT_FAILED, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int
    k: int
    p: int
    q: int
    m: int
    nu: float
    seed: str = "bundled"
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    r_star: float = DEFAULT_R_STAR
    output_dir: str | None = None
    reference: dict = field(default_factory=dict)
    source: Path | None = None

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.n, self.k, self.p, self.q, self.m, self.nu)

    @property
    def label(self) -> str:
        return f"n{self.n}_k{self.k}_{self.p}-{self.q}_m{self.m}"


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        cfg = RunConfig(
            n=int(doc["n"]), k=int(doc["k"]), p=int(doc["p"]), q=int(doc["q"]),
            m=int(doc["m"]), nu=float(doc["nu"]),
            seed=str(doc.get("seed", "bundled")),
            newton=NewtonSettings(**doc.get("newton", {})),
            r_star=float(doc.get("r_star", DEFAULT_R_STAR)),
            output_dir=doc.get("output_dir"),
            reference=dict(doc.get("reference", {})),
            source=path,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config {path}: {exc!r}") from exc
    if not (cfg.n >= 3 and 1 <= cfg.k < cfg.n and cfg.m >= 2 and cfg.nu >= 1 and cfg.p >= 1 and cfg.q >= 1):
        raise ConfigError(f"parameters out of range in {path}")
    try:
        cfg.params
    except ValueError as exc:
        raise ConfigError(f"bad parameters in {path}: {exc}") from exc
    return cfg


def make_seed(cfg: RunConfig) -> Seed:
    """Resolve the ``seed`` field: bundled, file:PATH, lyapunov:AMP or initial-conditions."""
    params = cfg.params
    kind, _, arg = cfg.seed.partition(":")
    if kind == "bundled":
        if (cfg.n, cfg.k, cfg.p, cfg.q) != (5, 3, 3, 1):
            raise ConfigError("bundled coefficients exist only for n=5, k=3, 3:1")
        seed = seed_bundled_trefoil(cfg.m, cfg.nu)
        return seed
    if kind == "file":
        target = Path(arg)
        if not target.is_absolute() and cfg.source is not None:
            target = cfg.source.parent / target
        try:
            return seed_from_file(target, params)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read seed file {target}: {exc}") from exc
    if kind == "lyapunov":
        try:
            amp = float(arg) if arg else 1e-2
        except ValueError as exc:
            raise ConfigError(f"bad Lyapunov amplitude {arg!r}") from exc
        return seed_lyapunov(params, amp)
    if kind == "initial-conditions":
        try:
            return seed_initial_conditions(params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown seed {cfg.seed!r}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def info_lines(n: int, k: int, p: int, q: int) -> list[str]:
    s1 = compute_s1(n)
    omega = math.sqrt(s1) * p / q
    res = check_resonance(n, k, p, q)
    lines = [
        f"n={n} k={k} p:q={p}:{q}",
        f"s1 = {s1:.16g}",
        f"omega = {omega:.16g}",
        f"T = {2 * math.pi / omega:.16g}",
        f"h = gcd(n,k) = {res.h}",
    ]
    if res.kind is ResonanceKind.SIMPLE:
        lines += [
            f"resonance: {res.kind.value}, k_tilde = {res.k_tilde}",
            f"expected knot: ({p}, {q} + w) torus knot, w = rotating-frame z-axis winding",
        ]
    else:
        lines.append(f"resonance: {res.kind.value}: not a simple choreography")
    return lines


def cmd_info(cfg: RunConfig, args) -> int:
    print("\n".join(info_lines(cfg.n, cfg.k, cfg.p, cfg.q)))
    return EXIT_OK


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _refine(cfg: RunConfig):
    seed = make_seed(cfg)
    for note in seed.notes:
        log.info(note)
    settings = cfg.newton
    if seed.provenance == "initial-conditions":
        settings = NewtonSettings(settings.tol, settings.max_iter, settings.damping, line_search=True)
    return solve(seed, settings)


def _write_trajectories(u, params: ProblemParams, out: Path, stem: str, samples: int) -> dict:
    written = {}
    rot = ch.reconstruct_rotating(u, params, samples)
    ch.export(rot, "csv", out / f"{stem}_rotating.csv")
    written["rotating"] = str(out / f"{stem}_rotating.csv")
    if params.resonance.is_simple:
        inert = ch.to_inertial(u, params, samples)
        ch.export(inert, "csv", out / f"{stem}_inertial.csv")
        written["inertial"] = str(out / f"{stem}_inertial.csv")
        try:
            knot = ch.classify_knot(inert, params, u)
            print(f"knot: {knot.describe()} (toroidal {knot.toroidal}, poloidal {knot.poloidal}, "
                  f"z-axis winding {knot.z_axis_winding})")
        except ch.KnotError as exc:
            print(f"knot: not classified ({exc})")
        print(f"closure residual {ch.closure_residual(inert):.3e}, "
              f"min pairwise distance {ch.min_pairwise_distance(inert):.4f}")
    return written


def cmd_solve(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    xbar, _, report = _refine(cfg)
    params = cfg.params
    write_state(out / f"{cfg.label}_xbar.json", xbar, params)
    print(f"newton converged in {report.iterations} iterations, residual {report.residuals[-1]:.3e}")
    _write_trajectories(xbar.u, params, out, cfg.label, args.samples)
    return EXIT_OK


def run_proof(cfg: RunConfig, out: Path | None, threads: int = 1, samples: int = ch.DEFAULT_SAMPLES):
    """Seed, refine and validate; returns the certificate."""
    xbar, ref, report = _refine(cfg)
    params = cfg.params
    log.info("newton residual %.3e after %d iterations", report.residuals[-1], report.iterations)
    xfile = None
    if out is not None:
        xfile = f"{cfg.label}_xbar.json"
        write_state(out / xfile, xbar, params)
    cert = validate(xbar, params, ref, cfg.r_star, threads=threads, xbar_file=xfile)
    if out is not None:
        (out / f"{cfg.label}_certificate.json").write_text(cert.to_json() + "\n")
        _write_trajectories(xbar.u, params, out, cfg.label, samples)
    return cert, xbar


def _print_certificate(cert) -> None:
    for name in ("Y0", "Z0", "Z1", "Z2"):
        value = getattr(cert, name)
        if value is not None:
            print(f"{name} = {value:.6e}")
    if cert.verified:
        print(f"r0 in [{cert.r0_lo:.6e}, {cert.r0_hi:.6e}], non-degeneracy constant {cert.nondegen:.4g}")
    print(cert.statement())


def cmd_prove(cfg: RunConfig, args) -> int:
    cert, _ = run_proof(cfg, _out_dir(cfg, args), args.threads, args.samples)
    _print_certificate(cert)
    return EXIT_OK if cert.verified else EXIT_FAILED


def format_table(rows: list[dict]) -> str:
    header = f"{'n':>2} {'k':>2} {'p:q':>6} {'T':>18} {'m':>4} {'nu':>5} {'r0':>10}  status"
    lines = [header]
    for r in rows:
        r0 = f"{r['r0']:.1e}" if r.get("r0") is not None else "-"
        lines.append(
            f"{r['n']:>2} {r['k']:>2} {str(r['p']) + ':' + str(r['q']):>6} {r['T']:>18.15f} "
            f"{r['m']:>4} {r['nu']:>5.3g} {r0:>10}  {r['status']}"
        )
    return "\n".join(lines)


def table_configs(paths: list[str]) -> list[Path]:
    """Expand directories to their ``*.json`` files, sorted."""
    found = []
    for p in map(Path, paths):
        found.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return found


def cmd_table(paths: list[str], args) -> int:
    rows = []
    failed = False
    for path in table_configs(paths):
        cfg = load_config(path)
        row = {"n": cfg.n, "k": cfg.k, "p": cfg.p, "q": cfg.q, "m": cfg.m, "nu": cfg.nu,
               "T": cfg.params.period, "r0": None}
        try:
            cert, _ = run_proof(cfg, _out_dir(cfg, args) if args.out else None, args.threads, args.samples)
            row["r0"] = cert.r0_lo
            row["status"] = "verified" if cert.verified else f"FAILED ({cert.failure_reason})"
            failed |= not cert.verified
        except (SolverError, ValidationError) as exc:
            row["status"] = f"FAILED ({exc})"
            failed = True
        rows.append(row)
        print(format_table([row]).splitlines()[1], flush=True)
    print(format_table(rows))
    return EXIT_FAILED if failed else EXIT_OK


def cmd_export(cfg: RunConfig, args) -> int:
    """Sample a coefficient file (``--coefficients``) or a freshly refined orbit."""
    out = _out_dir(cfg, args)
    params = cfg.params
    if args.coefficients:
        u = seed_from_file(args.coefficients, params).x0.u
    else:
        u = _refine(cfg)[0].u
    written = _write_trajectories(u, params, out, cfg.label, args.samples)
    for frame, path in written.items():
        print(f"{frame}: {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torus-choreo", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["info", "solve", "prove", "table", "export"])
    parser.add_argument("--config", action="append", default=[],
                        help="config JSON (repeatable for table; directories expand to their *.json)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--samples", type=int, default=ch.DEFAULT_SAMPLES)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--coefficients", help="coefficient file to sample (export only)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def bundled_config(name: str) -> Path:
    """Path of a shipped config, e.g. ``n5_k3_3-1``; extra verified cases live apart."""
    path = data_path(f"configs/{name}.json")
    return path if path.exists() else data_path(f"verified/{name}.json")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.samples < 2:
        print("error: --samples must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "table":
            return cmd_table(args.config, args)
        if len(args.config) != 1:
            raise ConfigError(f"{args.command} needs exactly one --config")
        cfg = load_config(args.config[0])
        handler = {"info": cmd_info, "solve": cmd_solve, "prove": cmd_prove, "export": cmd_export}[args.command]
        if args.command != "info" and not cfg.params.resonance.is_simple:
            raise ConfigError(f"{cfg.p}:{cfg.q} with k={cfg.k}: not a simple choreography")
        return handler(cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"error [config/io]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error [numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"error [validation]: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
