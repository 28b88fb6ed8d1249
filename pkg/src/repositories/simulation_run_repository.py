from sqlalchemy.orm import Session
from typing import List

from src.models.simulation_run import SimulationRun


class SimulationRunRepository:
    """Repository for recorded sweep rows"""

    def __init__(self, session: Session):
        self.session = session

    def create_many(self, rows: List[dict]) -> List[SimulationRun]:
        """Insert one record per sweep row in a single commit"""
        runs = [SimulationRun(**row) for row in rows]
        self.session.add_all(runs)
        self.session.commit()
        return runs

    def get_all(self) -> List[SimulationRun]:
        return self.session.query(SimulationRun).order_by(SimulationRun.id).all()

    def get_by_thread(self, thread: str) -> List[SimulationRun]:
        return self.session.query(SimulationRun).filter(
            SimulationRun.thread == thread
        ).order_by(SimulationRun.id).all()
