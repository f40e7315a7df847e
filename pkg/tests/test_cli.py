"""
Unit tests for cli.py module.
"""

import io
from unittest.mock import patch

import pandas as pd
import pytest

from contact_ms.cli import EIGEN_COLUMNS, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, create_parser, run
from contact_ms.config import CONFIG_ENV_VAR
from contact_ms.dtn import ORACLE_COLUMNS
from contact_ms.evolution import TRAJECTORY_COLUMNS
from contact_ms.model import EigensolverFailure
from contact_ms.spectrum import SWEEP_COLUMNS

FAST = ["--nodes", "33"]


def header(text):
    """Key-value pairs from the leading '# key=value' lines."""
    pairs = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, value = line[2:].partition("=")
        pairs[key] = value
    return pairs


def table(text):
    return pd.read_csv(io.StringIO(text), comment="#")


class TestParser:
    """Tests for the argument parser."""

    def test_subcommands(self):
        """Test that every subcommand parses."""
        parser = create_parser()
        for command in ("spectrum", "threshold", "sweep", "evolve", "kernel", "equilibria"):
            assert parser.parse_args([command]).command == command
        assert parser.parse_args(["oracle", "--nx", "64"]).nx == 64

    def test_flags_default_to_none(self):
        """Test that unset flags leave room for config files."""
        args = create_parser().parse_args(["spectrum"])
        assert args.l is None
        assert args.omega is None
        assert args.nodes is None

    def test_version(self, capsys):
        """Test --version."""
        assert run(["--version"]) == EXIT_OK
        assert "contact-ms" in capsys.readouterr().out

    def test_help(self, capsys):
        """Test --help."""
        assert run(["--help"]) == EXIT_OK
        assert "Exit codes" in capsys.readouterr().out


class TestCommands:
    """End-to-end tests for each subcommand."""

    def test_spectrum(self, capsys):
        """Test the verdict and eigenvalue table for convex walls."""
        code = run(["spectrum", "--l", "1", "--omega1", "-1", "--omega2", "-1", *FAST])
        captured = capsys.readouterr()
        assert code == EXIT_OK
        meta = header(captured.out)
        assert meta["verdict"] == "NormallyStable"
        assert meta["kernel_dim"] == "1"
        assert meta["semisimple"] == "True"
        frame = table(captured.out)
        assert list(frame.columns) == EIGEN_COLUMNS
        assert len(frame) == 5
        assert (frame["lambda"] < 0).all()
        assert "NormallyStable" in captured.err

    def test_threshold(self, capsys):
        """Test the omega+ threshold at l = 1."""
        code = run(["threshold", "--vary", "omega_plus", "--l", "1", "--tol", "1e-4", *FAST])
        frame = table(capsys.readouterr().out)
        assert code == EXIT_OK
        assert frame["vary"][0] == "omega_plus"
        assert frame["threshold"][0] == pytest.approx(2.0, abs=1e-3)

    def test_sweep(self, capsys):
        """Test the kappa sweep rows and verdicts."""
        code = run(["sweep", "--vary", "kappa:0:3.3:12", "--omega", "0", "--l", "1", *FAST])
        frame = table(capsys.readouterr().out)
        assert code == EXIT_OK
        assert list(frame.columns) == SWEEP_COLUMNS
        assert len(frame) == 12
        assert frame["verdict"].iloc[0] == "NormallyStable"
        assert frame["verdict"].iloc[-1] == "Unstable"

    def test_evolve(self, capsys):
        """Test the trajectory table and its header."""
        argv = ["evolve", "--omega", "-1", "--t-end", "0.05", "--n-steps", "20", *FAST]
        code = run(argv)
        out = capsys.readouterr().out
        assert code == EXIT_OK
        meta = header(out)
        assert meta["monotone"] == "True"
        assert float(meta["rate"]) < 0
        frame = table(out)
        assert list(frame.columns) == TRAJECTORY_COLUMNS
        assert len(frame) == 21

    @pytest.mark.parametrize("initial", ["cosine", "random"])
    def test_evolve_initial_data(self, capsys, initial):
        """Test the cosine and random initial data."""
        argv = ["evolve", "--initial", initial, "--t-end", "0.02", "--n-steps", "10", *FAST]
        assert run(argv) == EXIT_OK
        assert len(table(capsys.readouterr().out)) == 11

    def test_kernel(self, capsys):
        """Test the closed-form kernel report."""
        code = run(["kernel", "--omega", "-1", *FAST])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        meta = header(out)
        assert meta["dimension"] == "1"
        assert float(meta["semisimple_integral"]) == pytest.approx(-10.5 / 18.0)
        frame = table(out)
        assert list(frame.columns) == ["s", "basis_0"]
        assert len(frame) == 33

    def test_kernel_without_integral(self, capsys):
        """Test that neutral walls omit the semisimplicity integral."""
        assert run(["kernel", *FAST]) == EXIT_OK
        assert "semisimple_integral" not in header(capsys.readouterr().out)

    def test_equilibria(self, capsys):
        """Test the traced manifold between circular walls."""
        code = run(["equilibria", "--m-range=-0.05:0.05:5", "--eq-nodes", "17"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        meta = header(out)
        assert meta["walls"] == "circles"
        assert meta["tangent_rank"] == "1"
        frame = table(out)
        assert len(frame) == 5
        assert frame.columns[0] == "m"
        assert frame.columns[-1] == "residual"
        assert (frame["residual"] <= 1e-9).all()

    def test_oracle(self, capsys):
        """Test the DtN comparison on a coarse mesh."""
        code = run(["oracle", "--nx", "32", "--ny", "32", "--oracle-modes", "2"])
        frame = table(capsys.readouterr().out)
        assert code == EXIT_OK
        assert list(frame.columns) == ORACLE_COLUMNS
        assert list(frame["k"]) == [1, 2]


class TestExitCodes:
    """Tests for usage and numerical failures."""

    def test_unknown_command(self, capsys):
        """Test an unknown subcommand."""
        assert run(["stability"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_invalid_threshold_parameter(self, capsys):
        """Test a vary key that cannot be bisected."""
        assert run(["threshold", "--vary", "H", *FAST]) == EXIT_USAGE
        assert "Invalid configuration" in capsys.readouterr().err

    def test_sweep_needs_range(self, capsys):
        """Test that a sweep needs a range."""
        assert run(["sweep", *FAST]) == EXIT_USAGE
        assert "name:start:stop:count" in capsys.readouterr().err

    def test_too_few_nodes(self):
        """Test grid validation."""
        assert run(["spectrum", "--nodes", "3"]) == EXIT_USAGE

    def test_no_sign_change(self, capsys):
        """Test that a one-sided bracket is a numerical failure."""
        argv = ["threshold", "--vary", "omega_plus", "--bracket", "0.1:1", *FAST]
        assert run(argv) == EXIT_NUMERICAL
        assert "NoSignChange" in capsys.readouterr().err

    def test_geometric_constraint(self, capsys):
        """Test that |kappa| l >= 2 pi is reported verbatim."""
        assert run(["spectrum", "--kappa", "7", *FAST]) == EXIT_NUMERICAL
        assert "GeometricConstraintViolated" in capsys.readouterr().err

    def test_long_numerical_message_is_complete(self, capsys):
        """Test that a numerical failure prints its whole message."""
        message = "solver stalled " + "x" * 600 + " end"

        def failing(config, output):
            raise EigensolverFailure(message)

        with patch.dict("contact_ms.cli.COMMANDS", {"spectrum": failing}):
            assert run(["spectrum", *FAST]) == EXIT_NUMERICAL
        assert f"EigensolverFailure: {message}" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        """Test an unreadable config file."""
        assert run(["spectrum", "--config", str(tmp_path / "absent.cfg")]) == EXIT_USAGE


class TestOutputAndConfig:
    """Tests for output files, config files and determinism."""

    def test_deterministic(self, capsys):
        """Test that reruns produce byte-identical output."""
        argv = ["sweep", "--vary", "omega_plus:0.5:4:4", "--workers", "2", *FAST]
        assert run(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert run(argv) == EXIT_OK
        assert capsys.readouterr().out == first

    def test_output_file(self, tmp_path, capsys):
        """Test --output."""
        path = tmp_path / "kappa.csv"
        argv = ["sweep", "--vary", "kappa:0.5:3.3:3", "--output", str(path), *FAST]
        assert run(argv) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "Wrote 3 rows" in captured.err
        assert len(pd.read_csv(path)) == 3

    def test_config_file(self, tmp_path, capsys):
        """Test that a config file fills unset flags and flags win."""
        path = tmp_path / "run.cfg"
        path.write_text("omega1 = 4\nomega2 = 4\nnodes = 33\n", encoding="utf-8")
        assert run(["spectrum", "--config", str(path)]) == EXIT_OK
        assert header(capsys.readouterr().out)["verdict"] == "Unstable"
        assert run(["spectrum", "--config", str(path), "--omega", "-1"]) == EXIT_OK
        assert header(capsys.readouterr().out)["verdict"] == "NormallyStable"

    def test_config_from_environment(self, tmp_path, capsys):
        """Test the config path from the environment."""
        path = tmp_path / "env.cfg"
        path.write_text("omega = -1\nnodes = 33\ncount = 2\n", encoding="utf-8")
        with patch.dict("os.environ", {CONFIG_ENV_VAR: str(path)}):
            assert run(["spectrum"]) == EXIT_OK
        assert len(table(capsys.readouterr().out)) == 2
