#!/usr/bin/env python3
"""
Generates plain-language privacy reports from monitoring requirements,
a data flow diagram and a STRIDE analysis.
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
