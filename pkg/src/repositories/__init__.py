from .check_run_repository import CheckRunRepository
from .simulation_run_repository import SimulationRunRepository
