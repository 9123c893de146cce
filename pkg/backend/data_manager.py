"""Database-backed results ledger with SQLAlchemy persistence."""

import csv
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from sqlalchemy.orm import Session

from backend.database import session_factory
from backend.database_models import ResultRecord
from backend.models import ResultEnvelope, ResultRow
from src.utils.logger import get_logger

logger = get_logger(__name__)

ROW_FIELDS = ("quantity", "estimate", "band_lower", "band_upper", "replications", "failures", "value")

CSV_COLUMNS = [
    "experiment_id",
    "command",
    "seed",
    "quantity",
    "estimate",
    "band_lower",
    "band_upper",
    "replications",
    "failures",
    "value",
    "payload_sha256",
]


class ResultsManager:
    """
    Appends result rows to the ledger and reads them back.

    A row is keyed by (experiment id, seed, quantity); recording the same key
    again replaces the earlier row.
    """

    def __init__(self, url: Optional[str] = None):
        self.url = url
        self._sessions = session_factory(url)

    def _get_db(self) -> Session:
        return self._sessions()

    # ========================================================================
    # Writes
    # ========================================================================

    def record(self, envelope: ResultEnvelope, rows: List[Dict[str, Any]], wall_clock: Optional[float] = None) -> int:
        """
        Store the rows of one CLI result.

        Args:
            envelope: The printed document (its digest is stored with every row)
            rows: Flat rows, at least {"quantity": ...}
            wall_clock: Seconds spent, kept out of the digest

        Returns:
            Number of rows written
        """
        db = self._get_db()
        try:
            for raw in rows:
                row = ResultRow(
                    experiment_id=envelope.experiment_id,
                    command=envelope.command,
                    seed=envelope.seed,
                    payload_sha256=envelope.payload_sha256,
                    wall_clock=wall_clock,
                    **{k: v for k, v in raw.items() if k in ROW_FIELDS},
                )
                existing = (
                    db.query(ResultRecord)
                    .filter(
                        ResultRecord.experiment_id == row.experiment_id,
                        ResultRecord.seed == row.seed,
                        ResultRecord.quantity == row.quantity,
                    )
                    .first()
                )
                if existing is None:
                    existing = ResultRecord()
                    db.add(existing)
                for key, value in row.model_dump().items():
                    setattr(existing, key, value)
                existing.payload = raw
            db.commit()
            logger.info(f"Recorded {len(rows)} result rows for {envelope.experiment_id}")
            return len(rows)
        finally:
            db.close()

    # ========================================================================
    # Reads
    # ========================================================================

    def query(self, experiment_id: Optional[str] = None, seed: Optional[int] = None) -> List[ResultRow]:
        """Rows for an experiment (and seed), in insertion order."""
        db = self._get_db()
        try:
            q = db.query(ResultRecord)
            if experiment_id is not None:
                q = q.filter(ResultRecord.experiment_id == experiment_id)
            if seed is not None:
                q = q.filter(ResultRecord.seed == seed)
            return [self._to_row(r) for r in q.order_by(ResultRecord.id).all()]
        finally:
            db.close()

    def export_csv(self, path: Union[str, Path], experiment_id: Optional[str] = None) -> Path:
        """Write the ledger (or one experiment's rows) as CSV."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = self.query(experiment_id)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: v for k, v in row.model_dump().items() if k in CSV_COLUMNS})
        logger.info(f"Exported {len(rows)} ledger rows to {path}")
        return path

    @staticmethod
    def _to_row(record: ResultRecord) -> ResultRow:
        return ResultRow(
            experiment_id=record.experiment_id,
            command=record.command,
            seed=record.seed,
            quantity=record.quantity,
            estimate=record.estimate,
            band_lower=record.band_lower,
            band_upper=record.band_upper,
            replications=record.replications,
            failures=record.failures,
            value=record.value,
            payload_sha256=record.payload_sha256,
            wall_clock=record.wall_clock,
        )
