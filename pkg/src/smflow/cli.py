"""Command-line driver: ``smflow {simulate,compare,verify,plotdata}``.

Run parameters come from an optional ``key = value`` file (``--config``)
overridden by flags.  The effective configuration is written next to every
output as ``config.txt`` and echoed in the JSON manifest, so a run can be
repeated with ``--config OUT/config.txt``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid
configuration or input, 3 numerical failure (CFL guard, non-convergence),
4 the two compared runs left the closeness radius.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import diagnostics, flow, initial, lemmas, sphere, verify
from .errors import CflError, ConfigError, ConvergenceError
from .fields import Grid, MapField, checksum, save_binary

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ESCAPE = 0, 1, 2, 3, 4

# key -> (parser, default); a default of None means "derived" or "required"
KEYS = {
    "grid.dim": (int, 1),
    "grid.n": (int, None),
    "grid.period": (float, 2 * math.pi),
    "integrator.scheme": (str, "rk4_project"),
    "integrator.dt": (float, None),
    "integrator.T": (float, 1.0),
    "ic.family": (str, "magnon"),
    "ic.k": (int, 1),
    "ic.theta0": (float, math.pi / 3),
    "ic.amplitude": (float, 0.5),
    "perturb.eps": (float, 1e-3),
    "seed": (int, 0),
    "output.dir": (str, "smflow_out"),
    "output.stride": (int, 10),
    "output.format": (str, "binary"),
    "diagnostics.s_samples": (int, 9),
}

FLAG_KEYS = {
    "n": "grid.n",
    "dim": "grid.dim",
    "dt": "integrator.dt",
    "T": "integrator.T",
    "scheme": "integrator.scheme",
    "stride": "output.stride",
    "eps": "perturb.eps",
    "seed": "seed",
    "out": "output.dir",
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        raw[key] = value
    return raw


@dataclass
class RunConfig:
    """Validated run parameters keyed by their dotted names."""

    values: dict = field(default_factory=dict)

    @classmethod
    def build(cls, raw: dict, require=("grid.n",)) -> "RunConfig":
        vals = {}
        for key, value in raw.items():
            if key not in KEYS:
                raise ConfigError(key, "unknown key")
            conv = KEYS[key][0]
            try:
                vals[key] = conv(value) if value is not None else None
            except ValueError:
                raise ConfigError(key, f"cannot parse {value!r} as {conv.__name__}") from None
        for key, (_, default) in KEYS.items():
            vals.setdefault(key, default)
        cfg = cls(vals)
        cfg.validate(require)
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def validate(self, require) -> None:
        v = self.values
        for key in require:
            if v[key] is None:
                raise ConfigError(key, "required but not given")
        if v["grid.dim"] not in (1, 2):
            raise ConfigError("grid.dim", "must be 1 or 2")
        if v["grid.n"] is not None and v["grid.n"] < 8:
            raise ConfigError("grid.n", "must be at least 8")
        for key in ("grid.period", "integrator.T"):
            if not v[key] > 0:
                raise ConfigError(key, "must be positive")
        if v["integrator.dt"] is not None and not v["integrator.dt"] > 0:
            raise ConfigError("integrator.dt", "must be positive")
        if v["integrator.scheme"] not in flow.SCHEMES:
            raise ConfigError("integrator.scheme", f"must be one of {flow.SCHEMES}")
        if v["ic.family"] not in initial.FAMILIES:
            raise ConfigError("ic.family", f"must be one of {sorted(initial.FAMILIES)}")
        if not 0 <= v["ic.theta0"] <= math.pi:
            raise ConfigError("ic.theta0", "must lie in [0, pi]")
        if not v["ic.amplitude"] >= 0:
            raise ConfigError("ic.amplitude", "must be non-negative")
        delta0 = sphere.UNIT_SPHERE.delta0
        if not 0 <= v["perturb.eps"] < delta0:
            raise ConfigError("perturb.eps", f"must satisfy 0 <= eps < delta0 = {delta0:g}")
        if v["output.stride"] < 1:
            raise ConfigError("output.stride", "must be >= 1")
        if v["output.format"] not in ("binary", "csv"):
            raise ConfigError("output.format", "must be 'binary' or 'csv'")
        s = v["diagnostics.s_samples"]
        if s < 3 or s % 2 == 0:
            raise ConfigError("diagnostics.s_samples", "must be odd and >= 3")

    def grid(self) -> Grid:
        return Grid.uniform(self["grid.dim"], self["grid.n"], self["grid.period"])

    def integrator(self, grid: Grid) -> flow.IntegratorConfig:
        icfg = flow.IntegratorConfig.for_grid(grid, self["integrator.dt"], self["integrator.scheme"])
        # record the derived default so the echoed config is complete
        self.values["integrator.dt"] = icfg.dt
        return icfg

    def initial_map(self, grid: Grid) -> MapField:
        params = {"k": self["ic.k"], "theta0": self["ic.theta0"], "amplitude": self["ic.amplitude"],
                  "seed": self["seed"]}
        return initial.make(self["ic.family"], grid, params)

    def to_text(self) -> str:
        lines = []
        for key in KEYS:
            val = self.values[key]
            if val is None:
                continue
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return dict(self.values)


def load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            raw.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            raw[key] = val
    return RunConfig.build(raw)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    return out


def _update_manifest(path: Path, **extra) -> None:
    doc = json.loads(path.read_text())
    doc.update(extra)
    path.write_text(json.dumps(doc, indent=2))


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: RunConfig) -> int:
    grid = cfg.grid()
    icfg = cfg.integrator(grid)
    u0 = cfg.initial_map(grid)
    traj = flow.evolve(u0, cfg["integrator.T"], icfg, observers=(flow.conservation_observer,),
                       stride=cfg["output.stride"])
    out = _outdir(cfg)
    manifest = traj.save(out / "snapshots", cfg["output.format"])
    save_binary(traj.final.u, out / "final.bin")
    traj.write_observer_csv(out / "observers.csv")
    _update_manifest(manifest, config=cfg.to_dict(), final="../final.bin")
    print(f"wrote {len(traj.times)} snapshots to T={traj.times[-1]:g}; outputs in {out}")
    return EXIT_OK


def run_compare(cfg: RunConfig):
    """Evolve the base map and its perturbation; returns the diagnostics report."""
    grid = cfg.grid()
    icfg = cfg.integrator(grid)
    u1 = cfg.initial_map(grid)
    eps = cfg["perturb.eps"]
    u2 = u1 if eps == 0 else initial.perturb(u1, eps, cfg["seed"])
    T, stride = cfg["integrator.T"], cfg["output.stride"]
    tr1 = flow.evolve(u1, T, icfg, stride=stride)
    tr2 = flow.evolve(u2, T, icfg, stride=stride)
    c_hess = lemmas.fit_hessian_constant(cfg["seed"])
    rep = diagnostics.compare_runs(tr1, tr2, c_hess)
    H = diagnostics.build_homotopy(u1, u2, cfg["diagnostics.s_samples"])
    rep.residuals["jacobi_first_order_ratio_t0"] = diagnostics.jacobi_estimate_check(H).first_order_ratio
    rep.metadata.update(
        config=cfg.to_dict(),
        integrator=icfg.to_dict(),
        dt_effective=tr1.dt,
        checksums={"u1_final": checksum(tr1.snapshots[-1]), "u2_final": checksum(tr2.snapshots[-1])},
    )
    return rep


def cmd_compare(cfg: RunConfig) -> int:
    rep = run_compare(cfg)
    out = _outdir(cfg)
    rep.write(out / "diagnostics.json", out / "diagnostics.csv")
    if "escape" in rep.metadata:
        esc = rep.metadata["escape"]
        print(f"error: closeness: runs separated beyond delta0 at t={esc['t']:g} "
              f"(node {esc['node']}, distance {esc['distance']:.4g}); report truncated", file=sys.stderr)
        return EXIT_ESCAPE
    C = rep.gronwall_C
    print(f"{len(rep.times)} samples; gronwall_C = {'n/a' if C is None else f'{C:.6g}'}; "
          f"report in {out / 'diagnostics.json'}")
    return EXIT_OK


def cmd_verify(suite, seed, flip, out) -> int:
    sign = -sphere.CURVATURE_SIGN if flip else None
    checks = verify.run_checks(suite, seed, sign)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        doc = {"suite": suite or "all", "seed": seed, "curvature_flipped": flip,
               "checks": [c.to_dict() for c in checks]}
        (Path(out) / "verify.json").write_text(json.dumps(doc, indent=2))
    return EXIT_FAIL if failed else EXIT_OK


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def plot_rows(rep: diagnostics.DiagnosticsReport) -> list:
    """Rows ``t, Q1, Q2, log(Q1+Q2), Q(0) exp(2 C t)``; ``log 0`` is written ``-inf``."""
    Q = rep.Q
    C = rep.gronwall_C
    rows = []
    for t, a, b, q in zip(rep.times, rep.Q1, rep.Q2, Q):
        logq = math.log(q) if q > 0 else -math.inf
        if Q[0] == 0:
            bound = 0.0
        elif C is None:
            bound = math.nan
        else:
            bound = Q[0] * math.exp(2 * C * t)
        rows.append((t, a, b, logq, bound))
    return rows


def cmd_plotdata(report, out=None) -> int:
    path = Path(report)
    try:
        rep = diagnostics.DiagnosticsReport.from_json(json.loads(path.read_text()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: report: cannot load {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    target = Path(out) if out else path.with_name("plotdata.txt")
    lines = ["# t Q1 Q2 log(Q1+Q2) Q(0)*exp(2*C*t)"]
    lines += [" ".join(_fmt(v) for v in row) for row in plot_rows(rep)]
    target.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} rows to {target}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smflow", description="Schroedinger map flow T^m -> S^2 laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int, help="nodes per axis")
        p.add_argument("--dim", type=int, choices=(1, 2))
        p.add_argument("--dt", type=float)
        p.add_argument("--T", type=float)
        p.add_argument("--stride", type=int)
        p.add_argument("--scheme", choices=flow.SCHEMES)

    run_flags(sub.add_parser("simulate", help="evolve one initial condition"))
    cmp_ = sub.add_parser("compare", help="evolve a map and its perturbation, report Q1/Q2 diagnostics")
    run_flags(cmp_)
    cmp_.add_argument("--eps", type=float, help="perturbation size (pointwise geodesic distance)")

    ver = sub.add_parser("verify", help="run the built-in verification checks")
    ver.add_argument("--suite", choices=sorted(verify.SUITES))
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", help="directory for verify.json")
    ver.add_argument("--debug-flip-curvature", action="store_true",
                     help="flip the curvature sign (the curvature-sensitive checks must then fail)")

    plot = sub.add_parser("plotdata", help="write whitespace-delimited plot columns from a compare report")
    plot.add_argument("report", help="diagnostics.json written by compare")
    plot.add_argument("--out", help="output file (default: plotdata.txt next to the report)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed, args.debug_flip_curvature, args.out)
        if args.command == "plotdata":
            return cmd_plotdata(args.report, args.out)
        cfg = load_config(args)
        return {"simulate": cmd_simulate, "compare": cmd_compare}[args.command](cfg)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CflError as exc:
        print(f"error: cfl: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConvergenceError as exc:
        print(f"error: convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
