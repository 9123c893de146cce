"""End-to-end runs of the bksim command line: one JSON document per call."""

import json
from pathlib import Path

import pytest

from backend.data_manager import ResultsManager
from src.main import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


def _run(capsys, command, config, *extra):
    argv = [command, "--config", config, "--config-dir", str(CONFIG_DIR), *extra]
    code = main(argv)
    document = json.loads(capsys.readouterr().out)
    return code, document


class TestDocuments:
    def test_two_state_exact(self, capsys, tmp_path):
        code, doc = _run(capsys, "exact", "two_state.json", "--no-ledger", "--out", str(tmp_path))
        assert code == 0
        assert doc["schema"] == 1
        assert doc["experiment_id"] == "two_state"
        assert doc["payload"]["stationary"]["marginal_plus"] == "7/10"
        assert (tmp_path / "two_state").is_dir()

    def test_simulation_is_reproducible(self, capsys, tmp_path):
        _, first = _run(capsys, "simulate", "simulate_order0.json", "--no-ledger", "--out", str(tmp_path / "a"))
        _, second = _run(capsys, "simulate", "simulate_order0.json", "--no-ledger", "--out", str(tmp_path / "b"))
        assert first["seed"] == 11
        assert first["payload_sha256"] == second["payload_sha256"]
        assert first["payload"]["length"] == 4000
        assert "sample" not in first["payload"]

    def test_seed_flag_changes_the_run(self, capsys, tmp_path):
        _, first = _run(capsys, "simulate", "simulate_order0.json", "--no-ledger", "--out", str(tmp_path))
        _, second = _run(
            capsys, "simulate", "simulate_order0.json", "--no-ledger", "--out", str(tmp_path), "--seed", "12"
        )
        assert second["seed"] == 12
        assert first["payload_sha256"] != second["payload_sha256"]

    def test_printed_constant_family(self, capsys):
        code, doc = _run(capsys, "check-criterium", "corollary1.json", "--no-ledger")
        assert code == 0
        assert doc["payload"]["verdict"] == "NonUniquenessCertified"

    def test_strict_base_flag(self, capsys):
        _, doc = _run(capsys, "check-criterium", "corollary1.json", "--no-ledger", "--strict-base")
        assert doc["payload"]["verdict"] == "NotCertified"

    def test_gen_params_writes_document(self, capsys, tmp_path):
        code, doc = _run(capsys, "gen-params", "gen_params_corollary1.json", "--no-ledger", "--out", str(tmp_path))
        assert code == 0
        assert doc["payload"]["first_orders"] == ["217", str(577 ** 217)]
        written = json.loads((tmp_path / "gen_params_corollary1" / "params.json").read_text())
        assert written == doc["payload"]["params"]


class TestErrors:
    def test_missing_config(self, capsys):
        code, doc = _run(capsys, "exact", "no_such_experiment.json", "--no-ledger")
        assert code == 2
        assert doc["exit_code"] == 2
        assert doc["error"] == "config"

    def test_command_mismatch(self, capsys):
        code, _ = _run(capsys, "dbar", "two_state.json", "--no-ledger")
        assert code == 2

    def test_scan_overflow(self, capsys, tmp_path):
        code, doc = _run(capsys, "simulate", "simulate_overflow.json", "--no-ledger", "--out", str(tmp_path))
        assert code == 3
        assert doc["error"] == "scan_overflow"

    def test_alpha_outside_range(self, capsys):
        code, doc = _run(capsys, "check-criterium", "criterium_alpha_rejected.json", "--no-ledger")
        assert code == 4
        assert doc["type"] == "ParameterError"

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["sample", "--config", "two_state.json"])


class TestLedger:
    def test_rows_are_recorded(self, capsys, tmp_path, results_url):
        code, doc = _run(capsys, "exact", "two_state.json", "--results-db", results_url, "--out", str(tmp_path))
        assert code == 0
        rows = ResultsManager(results_url).query("two_state")
        assert [r.quantity for r in rows] == ["marginal_plus"]
        assert rows[0].value == "7/10"
        assert rows[0].payload_sha256 == doc["payload_sha256"]


@pytest.mark.slow
class TestWorkerInvariance:
    RUNS = [
        ("estimate", "two_state_marginal.json"),
        ("estimate", "marginals_random_tables.json"),
        ("estimate", "eta_theta.json"),
        ("estimate", "concentration.json"),
        ("dbar", "dbar_lower_upper.json"),
        ("dbar", "dbar_majorant.json"),
        ("phase-transition", "phase_transition.json"),
        ("simulate", "simulate_lower_k2.json"),
    ]

    @pytest.mark.parametrize("command,config", RUNS, ids=[c for _, c in RUNS])
    def test_documents_do_not_depend_on_worker_count(self, capsys, tmp_path, command, config):
        documents = []
        for workers in (1, 2, 8):
            extra = ["--no-ledger", "--out", str(tmp_path / str(workers)), "--workers", str(workers)]
            if command != "simulate":
                extra += ["--n", "40"]
            code, doc = _run(capsys, command, config, *extra)
            assert code == 0
            documents.append(doc)
        assert documents[0]["payload_sha256"] == documents[1]["payload_sha256"] == documents[2]["payload_sha256"]
        assert documents[0]["payload"] == documents[2]["payload"]


class TestEstimateValidation:
    def test_random_tables_only_for_marginals(self, capsys, tmp_path):
        config = tmp_path / "bad_tables.json"
        config.write_text(json.dumps({
            "schema": 1,
            "command": "estimate",
            "id": "bad_tables",
            "quantity": "eta_theta",
            "n": 10,
            "random_tables": {"count": 2, "max_order": 3},
        }))
        code, doc = _run(capsys, "estimate", str(config), "--no-ledger")
        assert code == 2
        assert doc["error"] == "config"

    def test_concentration_grid_reports_every_instance(self, capsys):
        code, doc = _run(capsys, "estimate", "concentration.json", "--no-ledger", "--n", "30", "--workers", "1")
        assert code == 0
        instances = doc["payload"]["instances"]
        assert len(instances) == 7
        assert doc["payload"]["all_hold"]
