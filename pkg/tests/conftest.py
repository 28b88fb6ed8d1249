from pathlib import Path

import pytest

from src.services.bta import ThreadHandle, parse_spec

THREADS_DIR = Path(__file__).parent.parent / "threads"


def thread(text: str, name: str | None = None) -> ThreadHandle:
    return parse_spec(text).handle(name)


@pytest.fixture
def branch_thread() -> ThreadHandle:
    return thread("X = f.m ? Y : Z\nY = S\nZ = D\n")


@pytest.fixture
def stop_thread() -> ThreadHandle:
    return thread("X = S\n")


@pytest.fixture
def threads_dir() -> Path:
    return THREADS_DIR
