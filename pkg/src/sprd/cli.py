"""``sprd`` command line: single solves, benchmark tables and dumps.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.  Output is
rendered completely in memory before anything is written, so a failing run
never leaves a partial table behind.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .analysis import (
    MEASURES,
    TABLE_MEASURE,
    SolveSettings,
    SpectralError,
    convergence_rates,
    error_table,
    refinement_ladder,
    spectral_table,
)
from .blocktri import SolverError
from .dumps import write_mesh, write_operator, write_solution
from .mesh import build_mesh
from .scheme import DEFAULT_GAMMA, node_diagnostics, verify_positive_type
from .stepper import Discretization, RecursionIdentityError, TimeGrid, integrate
from .systems import builtin_example, validate_coupling
from .tables import error_csv, rate_csv, render_error_text, render_spectral_text, spectral_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

DEFAULT_EPS = "4..32:4"
COMMANDS = ("solve", "table", "rates", "rho", "dump-mesh")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which would collide with the
    # numerical-failure code
    def error(self, message):
        raise ConfigError(message)


def parse_eps_exps(text: str) -> List[int]:
    """``"k"`` or ``"k1..k2:step"`` (step defaults to 1), inclusive of both ends."""
    try:
        if ".." not in text:
            ks = [int(text)]
        else:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            step_v = int(step) if step else 1
            if step_v < 1:
                raise ConfigError(f"step must be positive in {text!r}")
            ks = list(range(int(lo), int(hi) + 1, step_v))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse --eps-exp {text!r}") from None
    if not ks or any(k < 0 for k in ks):
        raise ConfigError(f"--eps-exp {text!r} gives no valid exponents")
    return ks


def parse_l_mode(text: str):
    if text in ("lstar", "lnN"):
        return text, None
    if text.startswith("value:"):
        try:
            return "explicit", float(text[len("value:"):])
        except ValueError:
            raise ConfigError(f"cannot parse --l-mode {text!r}") from None
    raise ConfigError(f"--l-mode must be lstar, lnN or value:<real>, got {text!r}")


@dataclass
class RunConfig:
    command: str
    example_id: int
    eps_exponents: List[int]
    n0: int
    dt0: float
    levels: int
    sigma0_override: Optional[float]
    gamma: float
    l_mode: str
    l_explicit: Optional[float]
    fmt: str
    output_path: Optional[str]
    table_id: Optional[int] = None
    measure: str = TABLE_MEASURE
    dump_operator: Optional[str] = None
    dump_solution: Optional[str] = None
    dump_mesh: Optional[str] = None

    @property
    def settings(self) -> SolveSettings:
        return SolveSettings(self.sigma0_override, self.l_mode, self.l_explicit, self.gamma)

    @property
    def ladder(self):
        return refinement_ladder(self.n0, self.dt0, self.levels)

    def validate(self) -> None:
        if self.n0 < 8 or self.n0 % 4:
            raise ConfigError(f"--n must be a multiple of 4 and at least 8, got {self.n0}")
        if self.levels < 1:
            raise ConfigError(f"--levels must be at least 1, got {self.levels}")
        if not self.dt0 > 0.0:
            raise ConfigError(f"--dt must be positive, got {self.dt0}")
        if self.sigma0_override is not None and not self.sigma0_override > 0.0:
            raise ConfigError(f"--sigma0 must be positive, got {self.sigma0_override}")
        if self.gamma < 0.0:
            raise ConfigError(f"--gamma must be nonnegative, got {self.gamma}")
        # every ladder level must divide the horizon evenly
        for _, dt in self.ladder:
            try:
                TimeGrid.from_horizon(1.0, dt)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sprd", description="Coupled singularly perturbed reaction-diffusion benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-cell progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def shared(p, eps_default):
        p.add_argument("--example", type=int, default=1, help="catalog id (1, 2 or 3)")
        p.add_argument("--eps-exp", default=eps_default, help="k or k1..k2:step, eps = 2^-k")
        p.add_argument("--n", type=int, default=64, help="number of mesh intervals (first column)")
        p.add_argument("--dt", type=float, default=0.5, help="time step (first column)")
        p.add_argument("--levels", type=int, default=5, help="ladder columns (N, dt) -> (2N, dt/4)")
        p.add_argument("--sigma0", type=float, default=None, help="layer-width constant (default 4/sqrt(beta*))")
        p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="regime switch constant")
        p.add_argument("--l-mode", default="lstar", help="lstar, lnN or value:<real>")
        p.add_argument("--format", choices=("csv", "text"), default="csv")
        p.add_argument("--out", default=None, help="write here instead of stdout")
        return p

    solve = shared(sub.add_parser("solve", help="integrate one (example, eps, N, dt)"), "8")
    solve.add_argument("--dump-operator", default=None, metavar="PATH")
    solve.add_argument("--dump-solution", default=None, metavar="PATH")
    solve.add_argument("--dump-mesh", default=None, metavar="PATH")

    table = shared(sub.add_parser("table", help="regenerate benchmark table 1..6"), DEFAULT_EPS)
    table.add_argument("--id", type=int, required=True, dest="table_id")
    table.add_argument("--measure", choices=MEASURES, default=TABLE_MEASURE)

    shared(sub.add_parser("rates", help="double-mesh errors with convergence rates"), DEFAULT_EPS)
    rho = shared(sub.add_parser("rho", help="transition-operator eigenvalue table"), DEFAULT_EPS)
    rho.add_argument("--measure", choices=MEASURES, default=TABLE_MEASURE)
    shared(sub.add_parser("dump-mesh", help="print the mesh for one (eps, N)"), "8")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    l_mode, l_explicit = parse_l_mode(args.l_mode)
    cfg = RunConfig(
        command=args.command,
        example_id=args.example,
        eps_exponents=parse_eps_exps(args.eps_exp),
        n0=args.n,
        dt0=args.dt,
        levels=args.levels,
        sigma0_override=args.sigma0,
        gamma=args.gamma,
        l_mode=l_mode,
        l_explicit=l_explicit,
        fmt=args.format,
        output_path=args.out,
        table_id=getattr(args, "table_id", None),
        measure=getattr(args, "measure", TABLE_MEASURE),
        dump_operator=getattr(args, "dump_operator", None),
        dump_solution=getattr(args, "dump_solution", None),
        dump_mesh=getattr(args, "dump_mesh", None),
    )
    if cfg.command == "table":
        if cfg.table_id not in range(1, 7):
            raise ConfigError(f"--id must be in 1..6, got {cfg.table_id}")
        # odd ids are error tables, even ids eigenvalue tables, two per example
        cfg.example_id = (cfg.table_id + 1) // 2
    if cfg.command in ("solve", "dump-mesh"):
        if len(cfg.eps_exponents) != 1:
            raise ConfigError(f"{cfg.command} takes a single --eps-exp")
        cfg.levels = 1
    cfg.validate()
    return cfg


def _system(cfg: RunConfig):
    try:
        return builtin_example(cfg.example_id)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _mesh(cfg: RunConfig, system):
    diagnostics = validate_coupling(system)
    try:
        return build_mesh(cfg.settings.mesh_config(cfg.n0, diagnostics), system.epsilon), diagnostics
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_solve(cfg: RunConfig, err) -> str:
    system = _system(cfg).with_epsilon(2.0 ** -cfg.eps_exponents[0])
    mesh, _ = _mesh(cfg, system)
    grid = TimeGrid.from_horizon(system.horizon, cfg.dt0)
    diagnostics = node_diagnostics(system, mesh)
    disc = Discretization.build(system, mesh, grid.dt, cfg.gamma, diagnostics)
    sigma0 = cfg.settings.mesh_config(cfg.n0, diagnostics).sigma0
    report = verify_positive_type(mesh, system, grid.dt, sigma0, cfg.gamma, diagnostics, disc.weights)
    err.write(report.format() + "\n")
    if not system.compatible:
        err.write("# note: the source violates the corner compatibility conditions\n")
    traj = integrate(system, mesh, grid, gamma=cfg.gamma, disc=disc)
    extra = {}
    if cfg.dump_operator:
        buf = io.StringIO()
        write_operator(disc.lhs, buf)
        extra[cfg.dump_operator] = buf.getvalue()
    if cfg.dump_mesh:
        buf = io.StringIO()
        write_mesh(mesh, buf)
        extra[cfg.dump_mesh] = buf.getvalue()
    buf = io.StringIO()
    write_solution(traj, buf)
    if cfg.dump_solution:
        extra[cfg.dump_solution] = buf.getvalue()
    for path, text in extra.items():
        with open(path, "w") as fh:
            fh.write(text)
    return buf.getvalue()


def run_dump_mesh(cfg: RunConfig) -> str:
    system = _system(cfg).with_epsilon(2.0 ** -cfg.eps_exponents[0])
    mesh, _ = _mesh(cfg, system)
    buf = io.StringIO()
    write_mesh(mesh, buf)
    return buf.getvalue()


def _check_mesh_config(cfg: RunConfig, system) -> None:
    diagnostics = validate_coupling(system)
    for n, _ in cfg.ladder:
        try:
            cfg.settings.mesh_config(n, diagnostics)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def run_errors(cfg: RunConfig, with_rates: bool) -> str:
    system = _system(cfg)
    _check_mesh_config(cfg, system)
    errors = error_table(system, cfg.eps_exponents, cfg.ladder, cfg.settings)
    rates = convergence_rates(errors) if with_rates and len(cfg.ladder) > 1 else None
    if cfg.fmt == "text":
        return render_error_text(errors, rates)
    if cfg.command == "rates":
        return rate_csv(rates) if rates is not None else error_csv(errors)
    return error_csv(errors)


def run_rho(cfg: RunConfig) -> str:
    system = _system(cfg)
    _check_mesh_config(cfg, system)
    table = spectral_table(system, cfg.eps_exponents, cfg.ladder, cfg.settings, cfg.measure)
    return render_spectral_text(table) if cfg.fmt == "text" else spectral_csv(table)


def run_table(cfg: RunConfig) -> str:
    if cfg.table_id % 2:
        return run_errors(cfg, with_rates=True)
    return run_rho(cfg)


def execute(cfg: RunConfig, err=sys.stderr) -> str:
    if cfg.command == "solve":
        return run_solve(cfg, err)
    if cfg.command == "dump-mesh":
        return run_dump_mesh(cfg)
    if cfg.command == "table":
        return run_table(cfg)
    if cfg.command == "rates":
        return run_errors(cfg, with_rates=True)
    return run_rho(cfg)


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=err)
        cfg = config_from_args(args)
        text = execute(cfg, err)
    except ConfigError as exc:
        err.write(f"sprd: configuration error: {exc}\n")
        return EXIT_CONFIG
    except (SolverError, SpectralError, RecursionIdentityError, FloatingPointError) as exc:
        err.write(f"sprd: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        err.write(f"sprd: {exc}\n")
        return EXIT_CONFIG
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
