"""Results ledger: upserts, queries and CSV export."""

import csv

from backend.data_manager import ResultsManager
from backend.database import resolve_url
from backend.models import ResultEnvelope, payload_digest


def _envelope(payload, seed=1, experiment_id="exp"):
    return ResultEnvelope(command="estimate", experiment_id=experiment_id, seed=seed, payload=payload)


class TestEnvelope:
    def test_digest_ignores_key_order(self):
        assert payload_digest({"a": 1, "b": 2}) == payload_digest({"b": 2, "a": 1})

    def test_timing_stays_out_of_the_digest(self):
        plain = _envelope({"x": 1})
        timed = ResultEnvelope(command="estimate", experiment_id="exp", seed=1, payload={"x": 1}, timing={"wall_clock_seconds": 3.0})
        assert plain.payload_sha256 == timed.payload_sha256

    def test_schema_alias(self):
        assert '"schema": 1' in _envelope({}).to_json()


class TestResultsManager:
    def test_record_and_query(self, results_url):
        manager = ResultsManager(results_url)
        written = manager.record(_envelope({"x": 1}), [{"quantity": "marginal_plus", "estimate": 0.7, "band_lower": 0.65, "band_upper": 0.75}])
        assert written == 1
        rows = manager.query("exp")
        assert len(rows) == 1
        assert rows[0].estimate == 0.7
        assert rows[0].command == "estimate"

    def test_same_key_replaces_row(self, results_url):
        manager = ResultsManager(results_url)
        manager.record(_envelope({"x": 1}), [{"quantity": "q", "estimate": 0.1}])
        manager.record(_envelope({"x": 2}), [{"quantity": "q", "estimate": 0.2}])
        rows = manager.query("exp", seed=1)
        assert [r.estimate for r in rows] == [0.2]

    def test_seeds_are_separate_rows(self, results_url):
        manager = ResultsManager(results_url)
        manager.record(_envelope({"x": 1}, seed=1), [{"quantity": "q", "estimate": 0.1}])
        manager.record(_envelope({"x": 1}, seed=2), [{"quantity": "q", "estimate": 0.3}])
        assert len(manager.query("exp")) == 2
        assert manager.query("exp", seed=2)[0].estimate == 0.3

    def test_unknown_fields_are_dropped(self, results_url):
        manager = ResultsManager(results_url)
        manager.record(_envelope({}), [{"quantity": "verdict", "value": "NotCertified", "note": "ignored"}])
        assert manager.query("exp")[0].value == "NotCertified"

    def test_export_csv(self, results_url, tmp_path):
        manager = ResultsManager(results_url)
        manager.record(_envelope({}, experiment_id="a"), [{"quantity": "q", "estimate": 0.5}])
        manager.record(_envelope({}, experiment_id="b"), [{"quantity": "q", "estimate": 0.6}])
        path = manager.export_csv(tmp_path / "out" / "ledger.csv", experiment_id="a")
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        assert rows[0]["experiment_id"] == "a"
        assert float(rows[0]["estimate"]) == 0.5


class TestUrls:
    def test_bare_path_is_sqlite(self):
        assert resolve_url("ledger.db") == "sqlite:///ledger.db"

    def test_postgres_scheme_is_normalized(self):
        assert resolve_url("postgres://u@h/db") == "postgresql://u@h/db"
