"""
qtherm - command-line entry point
"""
import sys

from qtherm.cli import main


if __name__ == "__main__":
    sys.exit(main())
