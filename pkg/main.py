"""
Main Application Entry Point

Runs the trajectory-grid simulator command line, e.g.

    python main.py simulate --config paper_polyfit --output runs/polyfit
"""

import sys

from cli.app import main

if __name__ == "__main__":
    sys.exit(main())
