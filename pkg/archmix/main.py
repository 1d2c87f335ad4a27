"""
Entry point for archmix.

Usage:
    python main.py verify --spec fixtures/arch1_archinf.json
    python main.py sweep --spec fixtures/arch1_tvarch.json --k 1..10 --samples 1000000
"""

import logging
import sys

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from config import get_runtime_config
from cli import run

# Configure logging
logging.basicConfig(
    level=getattr(logging, get_runtime_config().log_level),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def main() -> None:
    """Run one archmix command and exit with its status."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
