import logging
from typing import List, Optional

import pandas as pd
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from src.config import DATABASE_URL
from src.models import Base, CheckRun, SimulationRun
from src.repositories.check_run_repository import CheckRunRepository
from src.repositories.simulation_run_repository import SimulationRunRepository
from src.schema.configs import CompositionConfig
from src.schema.results import EquivVerdict

logger = logging.getLogger(__name__)


class ResultsRecorder:
    """Stores check verdicts and sweep rows in the results database"""

    def __init__(self, database_url: str = DATABASE_URL):
        self.engine = create_engine(database_url)
        self.SessionLocal = sessionmaker(bind=self.engine)
        Base.metadata.create_all(self.engine)

    def record_check(self, thread: str, cfg: CompositionConfig, verdict: EquivVerdict) -> CheckRun:
        with self.SessionLocal() as session:
            run = CheckRunRepository(session).create(
                thread=thread,
                maxlen=cfg.maxlen,
                capacity_msg=cfg.capacity_msg,
                capacity_reply=cfg.capacity_reply,
                mode=cfg.mode.value,
                strategy=cfg.strategy,
                equivalent=verdict.equivalent,
                lhs_states=verdict.lhs_states,
                rhs_states=verdict.rhs_states,
                counterexample=None if verdict.counterexample is None else verdict.counterexample.render(),
            )
            logger.info(f"Recorded check run {run.id} for {thread}")
            return run

    def record_sweep(self, table: pd.DataFrame) -> int:
        rows = table.to_dict(orient="records")
        with self.SessionLocal() as session:
            SimulationRunRepository(session).create_many(rows)
        logger.info(f"Recorded {len(rows)} simulation rows")
        return len(rows)

    def load_sweeps(self, thread: Optional[str] = None) -> pd.DataFrame:
        """Recorded sweep rows as a table with the CSV columns"""
        from src.services.simulation import CSV_COLUMNS

        with self.SessionLocal() as session:
            repo = SimulationRunRepository(session)
            runs: List[SimulationRun] = repo.get_by_thread(thread) if thread else repo.get_all()
            rows = [{column: getattr(run, column) for column in CSV_COLUMNS} for run in runs]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def load_checks(self) -> pd.DataFrame:
        with self.SessionLocal() as session:
            runs = CheckRunRepository(session).get_all()
            rows = [
                {
                    "thread": r.thread,
                    "maxlen": r.maxlen,
                    "capacity_msg": r.capacity_msg,
                    "capacity_reply": r.capacity_reply,
                    "mode": r.mode,
                    "strategy": r.strategy,
                    "equivalent": r.equivalent,
                    "rhs_states": r.rhs_states,
                }
                for r in runs
            ]
        return pd.DataFrame(rows)
