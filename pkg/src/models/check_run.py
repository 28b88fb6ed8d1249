from sqlalchemy import String, Integer, Boolean, DateTime, Text
from sqlalchemy.orm import Mapped, mapped_column
from sqlalchemy.sql import func
from datetime import datetime
from typing import Optional
from . import Base


class CheckRun(Base):
    """One equivalence check of a thread against its protocol composition"""
    __tablename__ = "check_run"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    thread: Mapped[str] = mapped_column(String, nullable=False)
    maxlen: Mapped[int] = mapped_column(Integer, nullable=False)
    capacity_msg: Mapped[int] = mapped_column(Integer, nullable=False)
    capacity_reply: Mapped[int] = mapped_column(Integer, nullable=False)
    mode: Mapped[str] = mapped_column(String, nullable=False)
    strategy: Mapped[str] = mapped_column(String, nullable=False)
    equivalent: Mapped[bool] = mapped_column(Boolean, nullable=False)
    lhs_states: Mapped[int] = mapped_column(Integer, nullable=False)
    rhs_states: Mapped[int] = mapped_column(Integer, nullable=False)
    counterexample: Mapped[Optional[str]] = mapped_column(Text, nullable=True)
    created_at: Mapped[datetime] = mapped_column(DateTime, nullable=False, server_default=func.now())
