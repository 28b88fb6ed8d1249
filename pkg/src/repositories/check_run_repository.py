from sqlalchemy.orm import Session
from typing import List

from src.models.check_run import CheckRun


class CheckRunRepository:
    """Repository for recorded equivalence checks"""

    def __init__(self, session: Session):
        self.session = session

    def create(self, **fields) -> CheckRun:
        """Create a new check run record"""
        run = CheckRun(**fields)
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)
        return run

    def get_all(self) -> List[CheckRun]:
        return self.session.query(CheckRun).order_by(CheckRun.id).all()
