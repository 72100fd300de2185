"""
CLI tests: argument resolution, output files and exit codes.
Every run writes under tmp_path.
"""

import numpy as np
import pytest

from edt_lab.errors import ConfigError
from edt_lab.main import build_parser, main, resolve_config
from edt_lab.models import Command, ModeKind, PacketSpec, PrimaryTrafficModel, QueueConfig, SensingMode, Strategy
from edt_lab.services.persistence_service import persistence_service
from edt_lab.services.queueing import mean_delay
from edt_lab.services.validation_service import Check, ValidationService

BASE_FLAGS = ["--lambda", "3", "--mu", "2", "--ttr", "4"]
QUEUE_FLAGS = ["--lambda", "10", "--mu", "6", "--ttr", "1"]


def _out(tmp_path, name=""):
    return str(tmp_path / name) if name else str(tmp_path) + "/"


# ── Resolution ─────────────────────────────────────────────────────────────────

def test_flags_resolve_into_experiment_config():
    args = build_parser().parse_args(["sweep", *QUEUE_FLAGS, "--ts", "0.5", "--psi-values", "2", "100",
                                      "--strategies", "nwp", "wp", "--no-sim"])
    cfg = resolve_config(args)
    assert cfg.command is Command.SWEEP
    assert cfg.psi_values == (2.0, 100.0)
    assert cfg.strategies == (Strategy.NWP, Strategy.WP)
    assert cfg.simulate is False
    assert cfg.sensing().kind is ModeKind.PERIODIC


def test_mode_inference():
    def parse(*extra):
        return resolve_config(build_parser().parse_args(["analytic", *BASE_FLAGS, *extra])).sensing()

    assert parse().kind is ModeKind.CONTINUOUS
    assert parse("--ts", "0.5").kind is ModeKind.PERIODIC
    assert parse("--ts", "0.5", "--pe", "0.1").kind is ModeKind.IMPERFECT
    assert parse("--ts", "0.5", "--mode", "imperfect").pe == 0.0
    with pytest.raises(ConfigError):
        parse("--mode", "periodic")


def test_config_file_with_flag_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("lambda=3\nmu=2\nttr=4\nts=0.5\ngrid_resolution=20\npe_values=0, 0.1\n", encoding="utf-8")
    args = build_parser().parse_args(["analytic", "--config", str(cfg_file), "--ttr", "2"])
    cfg = resolve_config(args)
    assert (cfg.lam, cfg.mu, cfg.ttr, cfg.ts) == (3.0, 2.0, 2.0, 0.5)
    assert cfg.grid_res == 20
    assert cfg.pe_values == (0.0, 0.1)


# ── Exit codes ─────────────────────────────────────────────────────────────────

def test_missing_required_flag_exits_2(tmp_path):
    assert main(["analytic", "--mu", "2", "--ttr", "4", "--out", _out(tmp_path)]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert main(["analytic", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_invalid_value_exits_2(tmp_path):
    assert main(["analytic", "--lambda", "-3", "--mu", "2", "--ttr", "4", "--out", _out(tmp_path)]) == 2


def test_short_horizon_exits_2(tmp_path):
    assert main(["analytic", *BASE_FLAGS, "--horizon", "20", "--out", _out(tmp_path)]) == 2


def test_queue_needs_psi(tmp_path):
    assert main(["queue", *QUEUE_FLAGS, "--ts", "0.5", "--out", _out(tmp_path)]) == 2


def test_unknown_subcommand_is_rejected_by_argparse():
    with pytest.raises(SystemExit):
        main(["fly"])


# ── Outputs ────────────────────────────────────────────────────────────────────

def test_analytic_writes_law_and_sidecar(tmp_path):
    assert main(["analytic", *BASE_FLAGS, "--out", _out(tmp_path), "-q"]) == 0
    columns, meta = persistence_service.read_table(tmp_path / "analytic_continuous.csv")
    assert list(columns) == ["t", "pdf", "cdf", "atom_mass"]
    cdf = np.asarray(columns["cdf"], dtype=float)
    assert np.all(np.diff(cdf) >= -1e-12)
    assert cdf[-1] == pytest.approx(1.0, abs=1e-6)
    assert meta["config"]["lam"] == 3.0
    assert meta["total_mass"] == pytest.approx(1.0, abs=1e-6)
    assert meta["mean"] == pytest.approx(0.6 * 34.945280494653 + 0.4 * 31.945280494653, rel=1e-4)


def test_imperfect_with_zero_pe_matches_periodic_output(tmp_path):
    base = [*BASE_FLAGS, "--ts", "0.5", "--horizon", "900", "--out", _out(tmp_path), "-q"]
    assert main(["analytic", *base]) == 0
    assert main(["analytic", "--mode", "imperfect", "--pe", "0", *base]) == 0
    periodic, _ = persistence_service.read_table(tmp_path / "analytic_periodic.csv")
    imperfect, _ = persistence_service.read_table(tmp_path / "analytic_imperfect.csv")
    assert periodic["t"] == imperfect["t"]
    for col in ("pdf", "cdf", "atom_mass"):
        assert np.max(np.abs(np.subtract(periodic[col], imperfect[col], dtype=float))) <= 1e-10


def test_conditional_case_output(tmp_path):
    assert main(["analytic", *BASE_FLAGS, "--case", "off", "--out", _out(tmp_path, "off.csv"), "-q"]) == 0
    columns, meta = persistence_service.read_table(tmp_path / "off.csv")
    first = columns["t"].index(4)
    assert columns["atom_mass"][first] == pytest.approx(np.exp(-2.0), rel=1e-12)
    assert meta["mean"] == pytest.approx(31.945280494653, rel=1e-4)


def test_simulate_writes_samples(tmp_path, capsys):
    assert main(["simulate", *BASE_FLAGS, "--ts", "0.5", "--samples", "2000", "--out", _out(tmp_path), "-q"]) == 0
    columns, meta = persistence_service.read_table(tmp_path / "samples.csv")
    assert len(columns["value"]) == 2000
    assert min(columns["value"]) >= 4.0 - 1e-9
    assert meta["config"]["samples"] == 2000
    assert "periodic" in capsys.readouterr().out


def test_sweep_without_simulation_flags_unstable_points(tmp_path):
    assert main(["sweep", *QUEUE_FLAGS, "--ts", "0.5", "--psi-values", "2", "100", "--no-sim",
                 "--out", _out(tmp_path), "-q"]) == 0
    columns, _ = persistence_service.read_table(tmp_path / "sweep.csv")
    assert columns["psi"] == [2, 100]
    assert columns["stable"] == [0, 1]
    assert columns["E_D"][0] == float("inf")
    assert columns["sim_packets"] == [0, 0]


def test_sweep_rows_expose_delay_terms(tmp_path):
    assert main(["sweep", *QUEUE_FLAGS, "--ts", "0.5", "--psi-values", "100", "--no-sim",
                 "--out", _out(tmp_path), "-q"]) == 0
    columns, _ = persistence_service.read_table(tmp_path / "sweep.csv")
    expected = mean_delay(QueueConfig(model=PrimaryTrafficModel(lam=10.0, mu=6.0), packet=PacketSpec(t_tr=1.0),
                                      mode=SensingMode.periodic(0.5), psi=100.0))
    for column, value in (("E1_t", expected.e1_t), ("E2_t", expected.e2_t), ("Et2", expected.et2),
                          ("p_empty", expected.p_empty), ("E_D", expected.e_d)):
        assert columns[column][0] == pytest.approx(value, rel=1e-9), column
    assert 0.0 < columns["p_empty"][0] < 1.0


def test_validate_failure_exits_1(tmp_path):
    assert main(["validate", "--sections", "reduction", "--tolerance", "1e-30",
                 "--out", _out(tmp_path), "-q"]) == 1
    columns, meta = persistence_service.read_table(tmp_path / "validation.csv")
    assert columns["check"] == ["reduction"]
    assert columns["passed"] == [0]
    assert meta["failed"] == ["reduction"]


def test_validate_success_exits_0(tmp_path):
    assert main(["validate", "--sections", "partial_fractions", "--out", _out(tmp_path), "-q"]) == 0
    columns, _ = persistence_service.read_table(tmp_path / "validation.csv")
    assert columns["check"] == ["partial_fractions", "partial_fraction_helpers"]
    assert columns["passed"] == [1, 1]


def test_validate_seeds_repeat_simulation_section(tmp_path, monkeypatch):
    seen = []

    def fake_simulation(self, vcfg):
        seen.append(vcfg.seed)
        return [Check("ks_continuous", 0.005, 0.001, True)]

    monkeypatch.setattr(ValidationService, "edt_simulation_checks", fake_simulation)
    assert main(["validate", "--sections", "simulation", "--seeds", "3", "4", "5",
                 "--out", _out(tmp_path), "-q"]) == 0
    assert seen == [3, 4, 5]
    columns, meta = persistence_service.read_table(tmp_path / "validation.csv")
    assert columns["check"] == ["ks_continuous@seed3", "ks_continuous@seed4", "ks_continuous@seed5"]
    assert meta["validation"]["seeds"] == [3, 4, 5]


@pytest.mark.slow
def test_queue_command(tmp_path, capsys):
    assert main(["queue", *QUEUE_FLAGS, "--ts", "0.5", "--psi", "8", "--horizon", "20000",
                 "--out", _out(tmp_path), "-q"]) == 0
    assert "E_D" in capsys.readouterr().out
    columns, meta = persistence_service.read_table(tmp_path / "sojourn.csv")
    assert len(columns["value"]) == int(meta["packets"])
