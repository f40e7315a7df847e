#!/usr/bin/env python3
"""
Command-line interface for contact-ms.

Usage:
    # Eigenvalues and verdict
    contact-ms spectrum --l 1 --omega1 -1 --omega2 -1

    # Critical wall parameter by bisection
    contact-ms threshold --vary omega_plus --l 1

    # Phase-diagram sweep
    contact-ms sweep --vary kappa:0:3.3:12 --omega 0 --l 1 --output kappa.csv

Environment Variables:
    CONTACT_MS_CONFIG - Config file used when --config is not given
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Callable, NoReturn, Optional

import numpy as np
import pandas as pd

from . import __version__
from .config import (
    INITIAL_CHOICES,
    WALL_CHOICES,
    RunConfig,
    config_path_from_env,
    load_config_file,
)
from .dtn import oracle_comparison
from .evolution import DegenerateTrajectory, evolve_linear, fit_decay_rate, monitor_invariants
from .kernel import DegenerateDenominator, kernel_description, semisimple_integral
from .model import BASES, AnalyzerError, ConfigurationError, HeightField, smooth_basis
from .spectrum import (
    VARY_CHOICES,
    classify,
    find_threshold,
    leading_eigenvalues,
    param_grid,
    sweep,
)
from .utils import FLOAT_FORMAT, format_float, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

EIGEN_COLUMNS = ["index", "lambda", "residual", "I_star", "dissipation", "mean"]


class UsageError(Exception):
    """Raised by the parser instead of exiting."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _shared_options() -> argparse.ArgumentParser:
    """Options common to every subcommand; all default to None so files can fill them."""
    parent = _Parser(add_help=False)

    model = parent.add_argument_group("Model parameters")
    model.add_argument("--l", type=float, help="Interface length (default: 1)")
    model.add_argument("--H", type=float, help="Bulk strip half-depth (default: 1)")
    model.add_argument("--omega1", type=float, help="Left wall parameter (default: 0)")
    model.add_argument("--omega2", type=float, help="Right wall parameter (default: 0)")
    model.add_argument("--omega", type=float, help="Set both wall parameters")
    model.add_argument("--kappa", type=float, help="Equilibrium curvature (default: 0)")

    grid = parent.add_argument_group("Grid")
    grid.add_argument("--nodes", type=int, help="Collocation nodes (default: 129)")
    grid.add_argument("--basis", choices=BASES, help="Grid basis (default: chebyshev)")
    grid.add_argument("--modes", type=int, help="Cosine modes for the DtN coupling")
    grid.add_argument("--count", type=int, help="Eigenpairs to report (default: 5)")

    analysis = parent.add_argument_group("Thresholds and sweeps")
    analysis.add_argument(
        "--vary",
        type=str,
        help=f"Threshold parameter {VARY_CHOICES}, or name:start:stop:count for sweeps",
    )
    analysis.add_argument("--bracket", type=str, help="Threshold bracket lo:hi")
    analysis.add_argument("--tol", type=float, help="Bisection tolerance (default: 1e-6)")
    analysis.add_argument("--workers", type=int, help="Sweep worker threads (default: 1)")

    evolve = parent.add_argument_group("Evolution")
    evolve.add_argument("--t-end", dest="t_end", type=float, help="Final time (default: 1)")
    evolve.add_argument("--n-steps", dest="n_steps", type=int, help="Time steps (default: 100)")
    evolve.add_argument("--initial", choices=INITIAL_CHOICES, help="Initial data (default: mode)")
    evolve.add_argument("--index", type=int, help="Eigenfunction index for mode data")
    evolve.add_argument("--seed", type=int, help="Seed for random data")

    oracle = parent.add_argument_group("DtN oracle")
    oracle.add_argument("--nx", type=int, help="Cells along the interface (default: 256)")
    oracle.add_argument("--ny", type=int, help="Cells across each half strip (default: 256)")
    oracle.add_argument(
        "--oracle-modes", dest="oracle_modes", type=int, help="Modes compared (default: 8)"
    )

    eq = parent.add_argument_group("Equilibria")
    eq.add_argument("--walls", choices=WALL_CHOICES, help="Wall layout (default: circles)")
    eq.add_argument("--radius1", type=float, help="Left wall radius (default: 1)")
    eq.add_argument("--radius2", type=float, help="Right wall radius (default: 1)")
    eq.add_argument("--separation", type=float, help="Wall anchor distance (default: 4)")
    eq.add_argument("--m-range", dest="m_range", type=str, help="Mean heights start:stop:count")
    eq.add_argument("--eq-nodes", dest="eq_nodes", type=int, help="Chart nodes (default: 33)")

    io = parent.add_argument_group("Input/output")
    io.add_argument("--output", "-o", type=str, help="Write data here instead of stdout")
    io.add_argument("--config", type=str, help="Flat key = value config file")
    return parent


CONFIG_DESTS = (
    "l", "H", "omega1", "omega2", "omega", "kappa",
    "nodes", "basis", "modes", "count",
    "vary", "bracket", "tol", "workers",
    "t_end", "n_steps", "initial", "index", "seed",
    "nx", "ny", "oracle_modes",
    "walls", "radius1", "radius2", "separation", "m_range", "eq_nodes",
)  # fmt: skip


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = _Parser(
        prog="contact-ms",
        description=(
            "Linearized stability analysis of two-phase Mullins-Sekerka interfaces\n"
            "meeting container walls at a right angle."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s spectrum --l 1 --omega1 -1 --omega2 -1
  %(prog)s threshold --vary omega_plus --l 1
  %(prog)s sweep --vary kappa:0:3.3:12 --omega 0 --l 1
  %(prog)s equilibria --walls circles --m-range=-0.05:0.05:11

Exit codes: 0 ok, 1 usage error, 2 numerical failure.
""",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="count",
        default=0,
        help="Increase log verbosity (-v info, -vv debug)",
    )
    parser.add_argument("--quiet", "-q", action="store_true", help="Only log errors")
    parser.add_argument("--log-file", type=str, default=None, help="Also log DEBUG to this file")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    parent = _shared_options()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, help_text in (
        ("spectrum", "Leading eigenvalues and the stability verdict"),
        ("threshold", "Bisect a stability threshold"),
        ("sweep", "Phase-diagram sweep as CSV"),
        ("evolve", "Linearized trajectory as CSV"),
        ("kernel", "Closed-form kernel report"),
        ("equilibria", "Traced nonlinear equilibria as CSV"),
        ("oracle", "Finite-difference DtN against the symbol"),
    ):
        sub.add_parser(name, parents=[parent], help=help_text, description=help_text)
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge the config file and the flags, flags first.

    Raises:
        ConfigurationError: On unreadable files, unknown keys or invalid values.
    """
    mapping: dict[str, object] = {}
    path = args.config or config_path_from_env()
    if path:
        mapping.update(load_config_file(path))
        _status(f"ℹ️  Loaded configuration from {path}")

    flags = {dest: getattr(args, dest) for dest in CONFIG_DESTS}
    if flags["omega"] is not None:
        # a shared --omega beats per-wall values from the file
        for key in ("omega1", "omega2"):
            mapping.pop(key, None)
    mapping.update({key: value for key, value in flags.items() if value is not None})
    return RunConfig.from_mapping(mapping)


def _emit(text: str, output: Optional[str], rows: int) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        _status(f"✅ Wrote {rows} rows to {output}")
    else:
        sys.stdout.write(text)


def _comment(**items: object) -> str:
    def fmt(value: object) -> str:
        return format_float(value) if isinstance(value, float) else str(value)

    return "".join(f"# {key}={fmt(value)}\n" for key, value in items.items())


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_spectrum(config: RunConfig, output: Optional[str]) -> int:
    p, grid = config.params, config.grid.spec()
    verdict = classify(p, grid)
    pairs = leading_eigenvalues(p, grid, config.count)
    frame = pd.DataFrame(
        [
            (i, pair.lam, pair.residual, pair.form_value, pair.dissipation, pair.h.mean())
            for i, pair in enumerate(pairs)
        ],
        columns=EIGEN_COLUMNS,
    )
    header = _comment(
        verdict=verdict.verdict.value,
        lambda1=verdict.leading_lambda,
        kernel_dim=verdict.kernel_dim,
        semisimple=verdict.semisimple,
        mu_min=verdict.threshold_margin,
    )
    _emit(header + _csv(frame), output, len(frame))
    _status(f"✅ {verdict.verdict.value} (lambda_1 = {format_float(verdict.leading_lambda)})")
    return EXIT_OK


def cmd_threshold(config: RunConfig, output: Optional[str]) -> int:
    t = config.threshold
    value = find_threshold(config.params, t.vary, t.bracket, t.tol, config.grid.spec())
    frame = pd.DataFrame([(t.vary, value)], columns=["vary", "threshold"])
    _emit(_csv(frame), output, 1)
    _status(f"✅ {t.vary} threshold = {format_float(value)}")
    return EXIT_OK


def cmd_sweep(config: RunConfig, output: Optional[str]) -> int:
    rng = config.sweep.range
    if rng is None:
        raise ConfigurationError("sweep needs --vary name:start:stop:count")
    rows = param_grid(config.params, rng.name, rng.values())
    table = sweep(rows, config.grid.spec(), workers=config.sweep.workers)
    _emit(table.to_csv(), output, len(table))
    errors = table.verdicts.count("Error")
    if errors:
        _status(f"❌ {errors} of {len(table)} rows failed; see the log")
    else:
        _status(f"✅ Swept {len(table)} rows over {rng.name}")
    return EXIT_OK


def _initial_data(config: RunConfig) -> HeightField:
    p, e = config.params, config.evolve
    grid = config.grid.spec().build(p.l)
    if e.initial == "mode":
        pairs = leading_eigenvalues(p, grid, e.index + 1)
        if e.index >= len(pairs):
            raise ConfigurationError(f"index {e.index} exceeds the {len(pairs)} available modes")
        return pairs[e.index].h
    if e.initial == "cosine":
        return grid.sample(lambda s: 1e-2 * np.cos(np.pi * s / p.l))
    basis = smooth_basis(grid, modes=min(8, grid.galerkin_modes), constant=True)
    coefficients = np.random.default_rng(e.seed).standard_normal(basis.size)
    return HeightField(grid, 1e-2 * (basis.values @ coefficients))


def cmd_evolve(config: RunConfig, output: Optional[str]) -> int:
    p, e = config.params, config.evolve
    h0 = _initial_data(config)
    traj = evolve_linear(h0, p, h0.grid, e.t_end, e.n_steps)
    report = monitor_invariants(traj)
    header = {"mean_drift": report.mean_drift, "monotone": report.monotone}
    try:
        header["rate"] = fit_decay_rate(traj)
    except (DegenerateTrajectory, ValueError) as exc:
        logger.warning("No decay rate: %s", exc)
    _emit(_comment(**header) + traj.to_csv(), output, len(traj))
    _status(f"✅ Evolved {len(traj)} samples to t = {format_float(e.t_end)}")
    return EXIT_OK


def cmd_kernel(config: RunConfig, output: Optional[str]) -> int:
    p = config.params
    grid = config.grid.spec().build(p.l)
    kernel = kernel_description(p, grid)
    header = {
        "dimension": kernel.dimension,
        "degenerate": kernel.degenerate,
        "system_singular": kernel.system_singular,
        "mean_free": kernel.mean_free,
    }
    if p.is_flat:
        coef = kernel.coefficients[0]
        try:
            header["semisimple_integral"] = semisimple_integral(p, coef.c)
        except DegenerateDenominator as exc:
            logger.info("Semisimplicity integral unavailable: %s", exc)
    columns = {"s": grid.nodes}
    columns.update({f"basis_{i}": b.values for i, b in enumerate(kernel.basis)})
    frame = pd.DataFrame(columns)
    _emit(_comment(**header) + _csv(frame), output, len(frame))
    _status(f"✅ Kernel dimension {kernel.dimension}")
    return EXIT_OK


def cmd_equilibria(config: RunConfig, output: Optional[str]) -> int:
    from .equilibria import (
        ChannelGeometry,
        equilibrium_grid,
        linearization_condition,
        manifold_tangent_rank,
        newton_trace_manifold,
    )

    eq = config.equilibria
    channel = ChannelGeometry.standard(eq.walls, eq.radius1, eq.radius2, eq.separation)
    grid = equilibrium_grid(channel, eq.nodes)
    manifold = newton_trace_manifold(channel, eq.m_values(), grid, H=config.params.H)
    header = {"walls": eq.walls, "condition": linearization_condition(channel, grid)}
    if len(manifold) >= 3:
        header["tangent_rank"] = manifold_tangent_rank(manifold)
    _emit(_comment(**header) + manifold.to_csv(), output, len(manifold))
    _status(f"✅ Traced {len(manifold)} of {eq.m_range[2]} equilibria")
    return EXIT_OK


def cmd_oracle(config: RunConfig, output: Optional[str]) -> int:
    o = config.oracle
    frame = oracle_comparison(config.params, (o.nx, o.ny), o.modes)
    _emit(_csv(frame), output, len(frame))
    _status(f"✅ Max relative error {format_float(float(frame['rel_error'].max()))}")
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, Optional[str]], int]] = {
    "spectrum": cmd_spectrum,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
    "evolve": cmd_evolve,
    "kernel": cmd_kernel,
    "equilibria": cmd_equilibria,
    "oracle": cmd_oracle,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and return its exit code.

    Returns:
        0 on success, 1 on usage or configuration errors, 2 on numerical failures.
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _status(f"❌ {e}")
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)

    setup_logging(verbosity=args.verbose, log_file=args.log_file, quiet=args.quiet)
    logger.info("contact-ms %s starting: %s", __version__, args.command)

    try:
        config = build_config(args)
        return COMMANDS[args.command](config, args.output)
    except (ConfigurationError, ValueError) as e:
        _status(f"❌ Invalid configuration: {e}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except AnalyzerError as e:
        _status(f"❌ {type(e).__name__}: {e}")
        return EXIT_NUMERICAL
    except OSError as e:
        _status(f"❌ {e}")
        return EXIT_USAGE


def main() -> None:
    """Main entry point."""
    from dotenv import load_dotenv

    load_dotenv()
    sys.exit(run())


if __name__ == "__main__":
    main()
