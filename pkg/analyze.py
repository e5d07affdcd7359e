"""
Constrained-model analysis - command-line entry point
"""
import sys

from bw_workbench.cli import main

if __name__ == "__main__":
    sys.exit(main())
