"""Command-line entry point for the experiment drivers.

Commands: convergence, zero-storage (convergence with s0 = 0), locking,
single-run.  A flat key=value config file can supply defaults; explicit
flags win.  Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

import argparse
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from .verification import (
    FIELD_ORDER,
    case_errors,
    run_convergence_experiment,
    run_locking_experiment,
)

COMMANDS = ("convergence", "locking", "zero-storage", "single-run")


@dataclass
class RunConfig:
    command: str
    element: int = 1
    refinements: tuple = (4, 8, 16, 32, 64)
    dt_rule: str = "h2"
    mu: float = 10.0
    lam: float = 10.0
    s0: float = 1.0
    kappa: float = 1.0
    alpha: float = 1.0
    t_final: float = 1.0
    diag: str = "right"
    output: str = "."
    fmt: str = "csv"
    lambdas: tuple = (1e1, 1e4, 1e7, 1e10)
    reference: int = 64
    n: int = 8

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.element not in (1, 2):
            raise UsageError("element must be 1 or 2")
        refs = self.refinements
        if len(refs) == 0 or any(r < 1 for r in refs):
            raise UsageError("refinements must be positive integers")
        for a, b in zip(refs, refs[1:]):
            if b != 2 * a:
                raise UsageError("refinements must double: base, 2*base, ...")
        if self.dt_rule not in ("h2", "h3"):
            try:
                dt = float(self.dt_rule)
            except ValueError:
                raise UsageError("dt-rule must be h2, h3, or a time step value")
            if dt <= 0 or abs(round(self.t_final / dt) * dt - self.t_final) > 1e-9:
                raise UsageError("t-final must be an integer multiple of dt")
        if self.fmt not in ("csv", "md"):
            raise UsageError("format must be csv or md")
        if self.diag not in ("right", "left"):
            raise UsageError("diag must be right or left")
        if self.command == "locking" and self.reference < max(refs):
            raise UsageError("reference mesh must be at least as fine as tests")

    def manifest(self, wall_time=None):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        if wall_time is not None:
            lines.append(f"wall_time_s={wall_time!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_manifest(text):
        known = {f.name: f for f in fields(RunConfig)}
        kwargs = {}
        for line in text.strip().splitlines():
            if not line.strip() or "=" not in line:
                continue
            key, _, raw = line.partition("=")
            if key not in known:
                continue
            kwargs[key] = _coerce(key, raw)
        return RunConfig(**kwargs)


class UsageError(Exception):
    pass


def _coerce(key, raw):
    if key in ("refinements",):
        return tuple(int(x) for x in raw.split(",") if x)
    if key in ("lambdas",):
        return tuple(float(x) for x in raw.split(",") if x)
    if key in ("element", "reference", "n"):
        return int(raw)
    if key in ("mu", "lam", "s0", "kappa", "alpha", "t_final"):
        return float(raw)
    return raw


def _read_config_file(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, raw = line.partition("=")
        out[key.strip()] = raw.strip()
    return out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="poromix",
        description="Five-field consolidation experiments on the unit square.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value defaults file (flags win)")
        p.add_argument("--element", type=int)
        p.add_argument("--refinements", help="comma list, e.g. 4,8,16,32,64")
        p.add_argument("--dt-rule", dest="dt_rule", help="h2, h3, or a value")
        p.add_argument("--mu", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--s0", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--diag", choices=("right", "left"))
        p.add_argument("--output")
        p.add_argument("--format", dest="fmt", choices=("csv", "md"))
        if name == "locking":
            p.add_argument("--lambdas", help="comma list of lambda values")
            p.add_argument("--reference", type=int)
        if name == "single-run":
            p.add_argument("--n", type=int)
    return parser


def parse_args(argv):
    """argv (no program name) -> validated RunConfig."""
    ns = build_parser().parse_args(argv)
    values = {"command": ns.command}
    if getattr(ns, "config", None):
        for key, raw in _read_config_file(ns.config).items():
            values[key] = _coerce(key, raw)
    for f in fields(RunConfig):
        flag = getattr(ns, f.name, None)
        if flag is not None and f.name != "command":
            if f.name == "refinements":
                flag = tuple(int(x) for x in flag.split(","))
            elif f.name == "lambdas":
                flag = tuple(float(x) for x in flag.split(","))
            values[f.name] = flag
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _write(cfg, stem, text, wall_time):
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    ext = "md" if cfg.fmt == "md" else "csv"
    table_path = outdir / f"{stem}.{ext}"
    table_path.write_text(text)
    (outdir / f"{stem}_manifest.txt").write_text(cfg.manifest(wall_time))
    return table_path


def dispatch(cfg):
    """Run the configured experiment; returns the process exit code."""
    start = time.perf_counter()
    stage = "setup"
    try:
        if cfg.command in ("convergence", "zero-storage"):
            stage = "convergence sweep"
            s0 = 0.0 if cfg.command == "zero-storage" else cfg.s0
            table = run_convergence_experiment(
                cfg.element, list(cfg.refinements), cfg.dt_rule, mu=cfg.mu,
                lam=cfg.lam, s0=s0, kappa=cfg.kappa, alpha=cfg.alpha,
                t_final=cfg.t_final, diag=cfg.diag,
            )
            text = table.to_markdown() if cfg.fmt == "md" else table.to_csv()
        elif cfg.command == "locking":
            stage = "locking sweep"
            table = run_locking_experiment(
                list(cfg.lambdas), list(cfg.refinements), cfg.reference,
                mu=cfg.mu, kappa=cfg.kappa, s0=cfg.s0, alpha=cfg.alpha,
                dt_rule=cfg.dt_rule, t_final=cfg.t_final, diag=cfg.diag,
            )
            text = table.to_markdown() if cfg.fmt == "md" else table.to_csv()
        else:
            stage = "single run"
            text = _single_run(cfg)
        wall = time.perf_counter() - start
        stage = "writing output"
        path = _write(cfg, cfg.command.replace("-", "_"), text, wall)
    except Exception as exc:  # numerical failure -> exit 1 with the stage
        print(f"poromix: failure during {stage}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


def _single_run(cfg):
    from .cases import standard_case
    from .mesh import build_structured_mesh
    from .timestepping import BiotSolver, TimeGrid
    from .verification import _dt_from_rule

    case = standard_case(
        mu=cfg.mu, lam=cfg.lam, s0=cfg.s0, kappa=cfg.kappa, alpha=cfg.alpha
    )
    dt = _dt_from_rule(cfg.dt_rule, cfg.n)
    nsteps = int(round(cfg.t_final / dt))
    mesh = build_structured_mesh(cfg.n, diag=cfg.diag)
    solver = BiotSolver(mesh, cfg.element, case, cfg.t_final / nsteps)
    state = solver.run(TimeGrid(cfg.t_final, nsteps))
    errs = case_errors(solver, state, case)
    if cfg.fmt == "md":
        lines = ["| field | error |", "|---|---|"]
        lines += [f"| {f} | {errs[f]:.3g} |" for f in FIELD_ORDER]
        return "\n".join(lines) + "\n"
    lines = ["field,error"]
    lines += [f"{f},{errs[f]!r}" for f in FIELD_ORDER]
    return "\n".join(lines) + "\n"


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"poromix: {exc}", file=sys.stderr)
        return 2
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
