"""
@description
Entry-point script for running the kicked-top simulator from a checkout.
It loads environment variables and hands the command line to the CLI.

Key features:
1. Loads environment from `.env` (via python-dotenv) before any module reads it.
2. Exits with the command's exit code (0 ok, 1 internal, 2 config, 3 no recurrence, 4 numerical).

@dependencies
- python-dotenv: for loading .env environment variables.
- kicked_top.cli: argument parsing and command dispatch.

@notes
- KICKED_TOP_LOG_LEVEL, KICKED_TOP_WORKERS and KICKED_TOP_CACHE_DIR may be set in .env.
- Pass `--config config/sensor.yaml` for the default declarative settings.
- After `pip install .` the same CLI is available as `kicked-top`.
"""

import sys

from dotenv import load_dotenv

# Load environment variables from .env
load_dotenv()

from kicked_top.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
