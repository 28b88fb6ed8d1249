from sqlalchemy import String, Integer, Float, DateTime
from sqlalchemy.orm import Mapped, mapped_column
from sqlalchemy.sql import func
from datetime import datetime
from . import Base


class SimulationRun(Base):
    """One row of a performance sweep"""
    __tablename__ = "simulation_run"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    thread: Mapped[str] = mapped_column(String, nullable=False, index=True)
    maxlen: Mapped[int] = mapped_column(Integer, nullable=False)
    strategy: Mapped[str] = mapped_column(String, nullable=False)
    seed: Mapped[int] = mapped_column(Integer, nullable=False)
    env: Mapped[str] = mapped_column(String, nullable=False)
    busy: Mapped[int] = mapped_column(Integer, nullable=False)
    idle: Mapped[int] = mapped_column(Integer, nullable=False)
    total: Mapped[int] = mapped_column(Integer, nullable=False)
    utilization: Mapped[float] = mapped_column(Float, nullable=False)
    msgs: Mapped[int] = mapped_column(Integer, nullable=False)
    replies: Mapped[int] = mapped_column(Integer, nullable=False)
    discarded: Mapped[int] = mapped_column(Integer, nullable=False)
    created_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, server_default=func.now())
