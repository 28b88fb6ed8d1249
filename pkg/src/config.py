"""
Environment-driven settings shared by the CLI, scripts and the dashboard.
"""

import os

from dotenv import load_dotenv

load_dotenv()

DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///./results.db")
DEFAULT_STATE_BOUND = int(os.getenv("ISP_STATE_BOUND", "1000000"))
DEFAULT_ORACLE_BOUND = int(os.getenv("ISP_ORACLE_BOUND", "300"))
LOG_LEVEL = os.getenv("ISP_LOG_LEVEL", "INFO")
