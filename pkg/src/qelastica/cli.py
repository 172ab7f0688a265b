"""Command-line front end: ``qelastica <subcommand> [options]``.

Subcommands
-----------
hierarchy   print KdV hierarchy equations and conserved densities
psdo        print fractional powers ``L^{m/2}`` of ``L = D^2 + u``
flow        run the MKdV loop flow and write frames plus a manifest
curve       periods, theta, wp and relation checks for a hyperelliptic curve
spectrum    Floquet discriminant scan and band edges of a Hill operator
verify      run the cross-module identity suites and print a pass/fail table

Exit codes: 0 on success, 2 for invalid arguments or configuration, 1 when a
computation fails.  Every run that writes a directory also writes
``manifest.json`` with the resolved configuration and the tool version.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import hecurve, hillspec, jetalg, loopflow, psido

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240601

FRAME_HEADER = ["s", "x", "y", "k"]
SCAN_HEADER = ["xbar", "delta", "stable"]
EDGE_HEADER = ["xbar", "level", "simple", "slope"]


class ConfigError(ValueError):
    """Invalid command-line arguments or configuration file."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_manifest(out: Path, command: str, config: dict, results: dict) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "qelastica",
        "version": __version__,
        "command": command,
        "config": config,
        "results": results,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(path: str | None) -> Path | None:
    if path is None:
        return None
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _complex_vector(text: str, g: int | None = None) -> np.ndarray:
    try:
        v = np.array([complex(x.strip().replace(" ", "")) for x in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex vector {text!r}") from exc
    if g is not None and v.size != g:
        raise ConfigError(f"expected {g} components, got {v.size}")
    return v


# -- hierarchy / psdo ----------------------------------------------------------


def cmd_hierarchy(args) -> int:
    if args.n is not None and args.upto is not None:
        raise ConfigError("give --n or --upto, not both")
    if args.n is not None:
        ns = [args.n]
    else:
        ns = list(range(1, (args.upto or 3) + 1))
    if min(ns) < 1 or max(ns) > 6:
        raise ConfigError("n must be between 1 and 6")
    for n in ns:
        print(f"n={n}: u_t = {jetalg.kdv_rhs(n).to_text()}")
        if args.densities:
            print(f"n={n}: h = {jetalg.hamiltonian_density(n).to_text()}")
    return 0


def cmd_psdo(args) -> int:
    if args.power < 1 or args.power % 2 == 0:
        raise ConfigError("--power must be an odd positive integer")
    if not 1 <= args.depth <= 12:
        raise ConfigError("--depth must be between 1 and 12")
    op = psido.frac_power(jetalg.u0, args.power, args.depth)
    print(f"L^({args.power}/2):")
    print(op.to_text())
    return 0


# -- flow ------------------------------------------------------------------------


@dataclass
class FlowConfig:
    loop: str = "circle"
    n: int = 256
    dt: float = 1e-5
    steps: int = 100
    save_every: int = 0
    seed: int = DEFAULT_SEED
    amplitude: float = 0.3
    modes: int = 8
    scheme: str = "integrating_factor"

    def validate(self) -> None:
        if self.loop not in ("circle", "random", "figure_eight"):
            raise ConfigError(f"unknown loop {self.loop!r}")
        if self.n < 16 or self.n % 2:
            raise ConfigError("n must be even and >= 16")
        if not self.dt > 0 or self.steps < 0 or self.save_every < 0:
            raise ConfigError("need dt > 0, steps >= 0, save_every >= 0")
        if not 0 < self.amplitude <= 1 or self.modes < 2:
            raise ConfigError("need 0 < amplitude <= 1 and modes >= 2")
        if self.scheme not in {s.value for s in loopflow.Scheme}:
            raise ConfigError(f"unknown scheme {self.scheme!r}")


def _flow_config(args) -> FlowConfig:
    cfg = FlowConfig()
    if args.config:
        parser = configparser.ConfigParser()
        try:
            with open(args.config) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if "flow" not in parser:
            raise ConfigError("config file needs a [flow] section")
        for key, raw in parser["flow"].items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            kind = type(getattr(cfg, key))
            try:
                setattr(cfg, key, kind(raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    for key in ("loop", "n", "dt", "steps", "save_every", "seed", "amplitude", "modes", "scheme"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _initial_loop(cfg: FlowConfig) -> loopflow.LoopState:
    if cfg.loop == "circle":
        return loopflow.circle(cfg.n)
    if cfg.loop == "figure_eight":
        return loopflow.classical_elasticas("figure_eight", cfg.n)
    rng = np.random.default_rng(cfg.seed)
    return loopflow.random_loop(rng, cfg.n, cfg.modes, cfg.amplitude)


def _frame_csv(state: loopflow.LoopState) -> str:
    z = loopflow.positions(state)
    k = loopflow.curvature(state)
    rows = [",".join(FRAME_HEADER)]
    for s, zz, kk in zip(state.s, z, k):
        rows.append(",".join(_fmt(v) for v in (s, zz.real, zz.imag, kk)))
    return "\n".join(rows) + "\n"


def cmd_flow(args) -> int:
    cfg = _flow_config(args)
    out = _out_dir(args.out)
    state = _initial_loop(cfg)
    params = loopflow.FlowParams(cfg.dt, cfg.steps, cfg.scheme, save_every=cfg.save_every)
    traj = loopflow.evolve_mkdv(state, params)
    frames = [f.summary() for f in traj.frames]
    results = {
        "frames": frames,
        "energy_drift": traj.energy_drift(),
        "max_closure_defect": traj.max_closure(),
        "winding": state.winding,
    }
    if out is not None:
        for f in traj.frames:
            (out / f"frame_{f.step:08d}.csv").write_text(_frame_csv(f.state))
        _write_manifest(out, "flow", vars(cfg), results)
    print(f"loop={cfg.loop} n={cfg.n} dt={cfg.dt} steps={cfg.steps}")
    print(f"energy {frames[0]['energy']!r} -> {frames[-1]['energy']!r} "
          f"(relative drift {results['energy_drift']:.3e})")
    print(f"max closure defect {results['max_closure_defect']:.3e}, winding {state.winding}")
    return 0


# -- curve -----------------------------------------------------------------------


def _load_curve(args) -> hecurve.HECurve:
    if bool(args.curve) == bool(args.branch_points):
        raise ConfigError("give exactly one of --curve FILE or --branch-points")
    try:
        if args.curve:
            return hecurve.HECurve.from_json(Path(args.curve).read_text())
        pts = [float(x) for x in args.branch_points.split(",")]
        return hecurve.HECurve(tuple(pts))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad curve: {exc}") from exc


def _cplx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def cmd_curve(args) -> int:
    curve = _load_curve(args)
    g = curve.genus
    if args.action in ("theta", "wp") and not args.point:
        raise ConfigError(f"{args.action} needs --point")
    point = _complex_vector(args.point, g) if args.point else None
    sig = hecurve.Sigma(curve)
    report: dict = {"genus": g, "branch_points": list(curve.branch_points)}
    if args.action == "periods":
        print(sig.data.to_json())
        report["periods"] = json.loads(sig.data.to_json())
    elif args.action == "theta":
        val = hecurve.theta(sig.data.omega1_inv @ point, sig.data.T, sig.char)
        print(f"theta[riemann](Omega'^-1 t) = {val!r}")
        print(f"sigma(t) = {sig(point)!r}")
        report["theta"] = _cplx(val)
    elif args.action == "wp":
        w = sig.tensors(point)
        for i in range(1, g + 1):
            for j in range(i, g + 1):
                print(f"wp_{i}{j} = {w(i, j)!r}")
        report["wp"] = [[_cplx(w(i, j)) for j in range(1, g + 1)] for i in range(1, g + 1)]
    else:
        if g != 3:
            raise ConfigError("the relation check is defined for genus 3")
        ok, rows = _relation_table(sig, np.random.default_rng(args.seed), args.points)
        for k, worst in enumerate(rows, start=1):
            print(f"relation {k:2d}: max relative residual {worst:.2e}")
        print(f"{ok}/15 relations pass")
        report["relations"] = rows
    out = _out_dir(args.out)
    if out is not None:
        config = {"action": args.action, "point": args.point, "seed": args.seed,
                  "points": args.points}
        _write_manifest(out, "curve", config, report)
    return 0


def _relation_table(sig, rng, count: int, tol: float = 1e-6) -> tuple[int, list[float]]:
    worst = np.zeros(15)
    for t in hecurve.random_points(sig, rng, count):
        res = hecurve.relation_residuals(sig.tensors(t), sig.curve.lam)
        worst = np.maximum(worst, [abs(d) / s for d, s in res])
    return int(np.sum(worst < tol)), [float(x) for x in worst]


# -- spectrum ----------------------------------------------------------------------


def _potential(args) -> tuple[hillspec.PeriodicPotential, dict]:
    src = args.source
    info: dict = {"source": src}
    if src == "zero":
        return hillspec.PeriodicPotential.zero(args.period), info
    if src == "lame":
        # u = -2 m sn^2(s | m) has period 2K(m) and band edges m, 1, 1 + m
        from scipy import special
        m = args.modulus**2
        period = 2 * special.ellipk(m)
        info.update(modulus=args.modulus, expected_edges=[m, 1.0, 1.0 + m])
        return hillspec.PeriodicPotential.from_function(
            lambda s: -2 * m * special.ellipj(s, m)[0] ** 2, period, args.samples), info
    if src == "file":
        if not args.file:
            raise ConfigError("--source file needs --file")
        try:
            samples = np.loadtxt(args.file, delimiter=",", ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read potential samples: {exc}") from exc
        return hillspec.PeriodicPotential(args.period, samples), info
    # from-curve: genus-one potential -2 (wp_11 - lam_2 / 3) on the real line
    curve = _load_curve(args)
    if curve.genus != 1:
        raise ConfigError("from-curve potentials are built for genus 1")
    sig = hecurve.Sigma(curve)
    period = abs(sig.data.omega1[0, 0])
    s = np.arange(args.samples) * period / args.samples
    u = hecurve.finite_gap_u(sig, s, hecurve.real_potential_shift(sig))
    c = np.array(curve.branch_points)
    info.update(branch_points=list(curve.branch_points),
                expected_edges=sorted(float(x) for x in -c - 5 * curve.lam[2] / 3))
    return hillspec.PeriodicPotential(period, u.real), info


def cmd_spectrum(args) -> int:
    if not args.period > 0 or args.points < 8 or args.samples < 32:
        raise ConfigError("need period > 0, points >= 8, samples >= 32")
    if not args.xmax > args.xmin:
        raise ConfigError("need xmax > xmin")
    pot, info = _potential(args)
    grid = np.linspace(args.xmin, args.xmax, args.points)
    scan = hillspec.discriminant_scan(pot, grid)
    edges = hillspec.band_edges(pot, (args.xmin, args.xmax), scan=scan)
    print(f"period {float(pot.period)!r}, {len(edges)} band edges in [{args.xmin}, {args.xmax}]")
    for e in edges:
        print(f"  xbar={e.xbar!r} level={e.level:+d} {'simple' if e.simple else 'double'}")
    out = _out_dir(args.out)
    if out is not None:
        (out / "scan.csv").write_text(scan.to_csv())
        with open(out / "edges.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EDGE_HEADER)
            for e in edges:
                w.writerow([_fmt(e.xbar), e.level, int(e.simple), _fmt(e.slope)])
        config = {k: getattr(args, k) for k in ("source", "period", "modulus", "file", "curve",
                                               "branch_points", "samples", "xmin", "xmax",
                                               "points")}
        info["period"] = pot.period
        info["simple_edges"] = [e.xbar for e in edges if e.simple]
        info["classification_mismatch"] = scan.classification_mismatch()
        _write_manifest(out, "spectrum", config, info)
    return 0


# -- verify --------------------------------------------------------------------------


def _suite_lax(args) -> list[tuple[str, bool, str]]:
    rows = []
    for n in (1, 2, 3):
        same = psido.lax_bracket(n) == jetalg.kdv_rhs(n)
        rows.append((f"lax bracket n={n} equals hierarchy", same, "exact"))
    for n in (2, 3):
        lhs = jetalg.total_derivative(psido.residue_hamiltonian(n))
        rhs = jetalg.apply_recursion(jetalg.total_derivative(psido.residue_hamiltonian(n - 1)))
        rows.append((f"residue recursion n={n}", lhs == rhs, "exact"))
    return rows


def _suite_miura(args) -> list[tuple[str, bool, str]]:
    state = loopflow.random_loop(np.random.default_rng(args.seed))
    dt = args.dt
    steps = int(round(args.time / dt))
    band = loopflow.resolved_band(dt)
    res = []
    for h, k in ((dt, steps), (dt / 2, 2 * steps)):
        probe = loopflow.miura_probe(state, loopflow.FlowParams(h, k), [args.time / 2], band)
        res.append(probe.max_residual)
    ratio = res[0] / res[1]
    return [("miura residual halves twice with dt", ratio >= 3.9,
             f"residual {res[0]:.2e} -> {res[1]:.2e}, ratio {ratio:.3f}")]


def _suite_genus3(args) -> list[tuple[str, bool, str]]:
    curve = hecurve.HECurve.random(np.random.default_rng(args.seed), 3)
    sig = hecurve.Sigma(curve)
    ok, worst = _relation_table(sig, np.random.default_rng(args.seed + 1), args.points)
    rows = [(f"relation {k}", w < 1e-6, f"{w:.1e}") for k, w in enumerate(worst, start=1)]
    rows.append(("relations passing", ok == 15, f"{ok}/15"))
    return rows


def _suite_finite_gap(args) -> list[tuple[str, bool, str]]:
    c = np.array([-1.1, 0.3, 1.6])
    curve = hecurve.HECurve(tuple(c))
    sig = hecurve.Sigma(curve)
    period = abs(sig.data.omega1[0, 0])
    s = np.arange(256) * period / 256
    u = hecurve.finite_gap_u(sig, s, hecurve.real_potential_shift(sig)).real
    expected = np.sort(-c - 5 * curve.lam[2] / 3)
    edges = hillspec.band_edges(hillspec.PeriodicPotential(period, u),
                                (expected[0] - 1, expected[-1] + 3))
    simple = hillspec.simple_edges(edges)
    count_ok = simple.size == 3
    err = float(np.max(np.abs(simple - expected))) if count_ok else float("inf")
    return [("three simple band edges", count_ok, f"{simple.size} found"),
            ("edges match branch points", err < 1e-6, f"max error {err:.1e}")]


SUITES = {
    "lax": _suite_lax,
    "miura": _suite_miura,
    "genus3": _suite_genus3,
    "finite-gap": _suite_finite_gap,
}


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if args.points < 1 or not args.dt > 0 or not args.time > 2 * args.dt:
        raise ConfigError("need points >= 1, dt > 0 and time > 2 dt")
    all_ok = True
    report = {}
    for name in names:
        t0 = time.perf_counter()
        rows = SUITES[name](args)
        elapsed = time.perf_counter() - t0
        print(f"[{name}] ({elapsed:.1f} s)")
        for label, ok, detail in rows:
            print(f"  {'PASS' if ok else 'FAIL'}  {label:<40s} {detail}")
        all_ok &= all(ok for _, ok, _ in rows)
        report[name] = [{"check": lbl, "pass": bool(ok), "detail": d} for lbl, ok, d in rows]
    print("all checks pass" if all_ok else "some checks FAILED")
    out = _out_dir(args.out)
    if out is not None:
        config = {k: getattr(args, k) for k in ("suite", "seed", "points", "dt", "time")}
        _write_manifest(out, "verify", config, report)
    return 0 if all_ok else 1


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qelastica", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("hierarchy", help="print KdV hierarchy equations")
    h.add_argument("--n", type=int, help="print the n-th equation only")
    h.add_argument("--upto", type=int, help="print equations 1..UPTO (default 3)")
    h.add_argument("--densities", action="store_true", help="also print conserved densities")
    h.set_defaults(func=cmd_hierarchy)

    q = sub.add_parser("psdo", help="print L^(m/2) for L = D^2 + u")
    q.add_argument("--power", type=int, default=1, help="odd numerator m (default 1)")
    q.add_argument("--depth", type=int, default=4, help="lowest retained degree -DEPTH")
    q.set_defaults(func=cmd_psdo)

    f = sub.add_parser("flow", help="evolve a loop by the MKdV flow")
    f.add_argument("--config", help="key = value file with a [flow] section")
    f.add_argument("--loop", choices=["circle", "random", "figure_eight"])
    f.add_argument("--n", type=int)
    f.add_argument("--dt", type=float)
    f.add_argument("--steps", type=int)
    f.add_argument("--save-every", dest="save_every", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--amplitude", type=float)
    f.add_argument("--modes", type=int)
    f.add_argument("--scheme", choices=[s.value for s in loopflow.Scheme])
    f.add_argument("--out", help="output directory for frames and manifest")
    f.set_defaults(func=cmd_flow)

    c = sub.add_parser("curve", help="periods, theta, wp and relations of a curve")
    c.add_argument("action", choices=["periods", "theta", "wp", "relations"])
    c.add_argument("--curve", help="JSON file with branch points as [re, im] pairs")
    c.add_argument("--branch-points", dest="branch_points",
                   help="comma separated real branch points")
    c.add_argument("--point", help="comma separated complex t, e.g. 0.1+0.2j,0.3")
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--points", type=int, default=10, help="random points for relations")
    c.add_argument("--out")
    c.set_defaults(func=cmd_curve)

    s = sub.add_parser("spectrum", help="Floquet discriminant and band edges")
    s.add_argument("--source", choices=["zero", "lame", "file", "from-curve"], default="zero")
    s.add_argument("--period", type=float, default=2 * np.pi)
    s.add_argument("--modulus", type=float, default=0.8, help="Lame modulus")
    s.add_argument("--file", help="one potential sample per line (uniform grid)")
    s.add_argument("--curve")
    s.add_argument("--branch-points", dest="branch_points")
    s.add_argument("--samples", type=int, default=256)
    s.add_argument("--xmin", type=float, default=-1.0)
    s.add_argument("--xmax", type=float, default=4.0)
    s.add_argument("--points", type=int, default=400)
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    v = sub.add_parser("verify", help="run identity suites")
    v.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--points", type=int, default=10)
    v.add_argument("--dt", type=float, default=1e-4, help="miura base step")
    v.add_argument("--time", type=float, default=0.02, help="miura run length")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return p


COMPUTATION_ERRORS = (
    ArithmeticError, RuntimeError, np.linalg.LinAlgError,
    hecurve.DegenerateCurve, hecurve.NearDivisor, hecurve.RadiusTooSmall,
    loopflow.StepTooLarge, psido.DepthUnderflow, psido.NotMultiplication,
    psido.TruncationTooShallow, jetalg.NotExact,
)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except COMPUTATION_ERRORS as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
