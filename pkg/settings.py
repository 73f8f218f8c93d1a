import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


DATA_DIR = Path(os.getenv('GENDAUG_DATA_DIR', 'artifacts'))
LOG_LEVEL = os.getenv('GENDAUG_LOG_LEVEL', 'INFO').upper()
PROGRESS = _flag('GENDAUG_PROGRESS', '1')
SLOW_TESTS = _flag('GENDAUG_SLOW_TESTS', '0')
