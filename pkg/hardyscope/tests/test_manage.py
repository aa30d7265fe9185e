"""

Integration tests for the command-line interface.


The commands run on a small config file (L = 8, n = 513, V = 1) and write
into a temporary output folder.
"""

import json
import os
from unittest.mock import patch

import pandas as pd
import pytest
from click.testing import CliRunner

from hardyscope.config import Config
from hardyscope.manage import cli


@pytest.fixture
def runner(tmp_path):
    """A CLI runner with logs redirected to the temporary folder."""

    with patch.object(Config, "LOG_FOLDER", str(tmp_path / "logs")):
        yield CliRunner()


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


@pytest.fixture
def config_file(tmp_path, out_dir):
    """A small experiment config on disk."""

    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "experiment_id": "cli",
                "grid": {"half_width": 8.0, "n_points": 513, "core_fraction": 0.5},
                "potential": {"family": "constant", "params": {"c": 1.0}},
                "n_atoms": 4,
                "n_test_functions": 8,
                "refine": False,
                "output": {"directory": str(out_dir), "format": "json"},
            }
        ),
        encoding="utf-8",
    )
    return str(path)


@pytest.mark.integration
class TestCommands:
    """Test cases for the subcommands."""

    def test_decompose(self, runner, config_file, out_dir):
        """Test that decompose saves the family and a passing report."""

        result = runner.invoke(cli, ["decompose", "--config", config_file])

        assert result.exit_code == 0, result.output
        family_path = out_dir / "cli.family.json"
        assert str(family_path) in result.output
        family = json.loads(family_path.read_text(encoding="utf-8"))
        assert len(family["intervals"]) == 32
        assert "cli.decomposition: PASSED" in result.output

    def test_heat_kernel(self, runner, config_file, out_dir):
        """Test one CSV per requested time and the domination report."""

        result = runner.invoke(
            cli, ["heat-kernel", "--config", config_file, "--t", "0.5", "--t", "1"]
        )

        assert result.exit_code == 0, result.output
        for name in ("heat_kernel_t0.5.csv", "heat_kernel_t1.csv"):
            frame = pd.read_csv(out_dir / name, index_col=0)
            assert frame.shape == (257, 257)
        report_path = out_dir / "cli.heat_kernel.json"
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["verdicts"]["feynman_kac.domination"] is True

    def test_riesz(self, runner, config_file, out_dir):
        """Test the truncated kernel export and the Gaussian table."""

        result = runner.invoke(
            cli, ["riesz", "--config", config_file, "--epsilon", "0.01"]
        )

        assert result.exit_code == 0, result.output
        assert os.path.isfile(out_dir / "riesz_kernel.csv")
        report = json.loads((out_dir / "cli.riesz.json").read_text(encoding="utf-8"))
        assert report["constants"]["epsilon"] == 0.01
        assert report["tables"]["gaussians"]["columns"] == ["width", "l2_ratio", "l1"]

    def test_format_override(self, runner, config_file, out_dir):
        """Test that --format csv writes one file per table and no JSON."""

        result = runner.invoke(
            cli, ["decompose", "--config", config_file, "--format", "csv"]
        )

        assert result.exit_code == 0, result.output
        assert not os.path.exists(out_dir / "cli.decomposition.json")
        assert any(name.endswith(".csv") for name in os.listdir(out_dir))

    @pytest.mark.slow
    def test_certify(self, runner, config_file, out_dir):
        """Test that certify writes its report."""

        result = runner.invoke(cli, ["certify", "--config", config_file])

        assert result.exit_code == 0, result.output
        report_path = out_dir / "cli.certification.json"
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert report["verdicts"]["family_valid"] is True

    @pytest.mark.slow
    def test_equivalence_matrix(self, runner, config_file, out_dir):
        """Test that --matrix pools one study per listed potential."""

        result = runner.invoke(
            cli,
            [
                "equivalence",
                "--config",
                config_file,
                "--matrix",
                "constant",
                "--matrix",
                "harmonic",
            ],
        )

        assert result.exit_code == 0, result.output
        report_path = out_dir / "cli.equivalence_matrix.json"
        report = json.loads(report_path.read_text(encoding="utf-8"))
        assert "constant0.r_min" in report["constants"]
        assert "harmonic1.r_min" in report["constants"]
        assert "pooled_spread" in report["verdicts"]


@pytest.mark.integration
class TestErrors:
    """Test cases for error reporting."""

    def test_free_potential_is_refused(self, runner, config_file):
        """Test that a runner error becomes a click error with exit code 1."""

        result = runner.invoke(
            cli, ["certify", "--config", config_file, "--potential", "free"]
        )

        assert result.exit_code == 1
        assert "Error:" in result.output

    def test_unknown_matrix_potential(self, runner, config_file):
        """Test that an unknown --matrix entry is reported before any study runs."""

        result = runner.invoke(
            cli, ["equivalence", "--config", config_file, "--matrix", "no-such"]
        )

        assert result.exit_code == 1
        assert "potential must be a family" in result.output

    def test_invalid_grid_override(self, runner, config_file):
        """Test that an even --grid-n is reported as a config error."""

        result = runner.invoke(
            cli, ["decompose", "--config", config_file, "--grid-n", "512"]
        )

        assert result.exit_code == 1
        assert "invalid grid" in result.output

    def test_malformed_config(self, runner, tmp_path):
        """Test that an unreadable config file is reported."""

        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")

        result = runner.invoke(cli, ["lemmas", "--config", str(path)])

        assert result.exit_code == 1
        assert "cannot read config" in result.output

    def test_missing_config(self, runner, tmp_path):
        """Test that click rejects a config path that does not exist."""

        result = runner.invoke(
            cli, ["equivalence", "--config", str(tmp_path / "missing.json")]
        )

        assert result.exit_code == 2
