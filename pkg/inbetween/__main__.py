"""
Entry point for running the toolkit as a module.

This allows the CLI to be run with: python -m inbetween
"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
