from sqlalchemy.orm import DeclarativeBase

class Base(DeclarativeBase):
    """Base class for all SQLAlchemy models"""
    pass

# Import all models here so Alembic can detect them
from .check_run import CheckRun
from .simulation_run import SimulationRun
