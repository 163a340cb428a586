#!/usr/bin/env python3
"""Command-line launcher for lmm_select when the package is not installed."""
import sys
from pathlib import Path

# Project root, so the package imports from a checkout
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))


def main():
    """Run the lmm_select command line."""
    try:
        from lmm_select.cli import main as cli_main
    except ImportError as exc:
        raise ImportError(
            "Couldn't import lmm_select's dependencies. Are numpy, scipy and "
            "the rest of requirements.txt installed in the active environment?"
        ) from exc
    return cli_main(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
