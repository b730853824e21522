#!/usr/bin/env python3
"""Entry point: render.py --csv PATH --scenario ID --out DIR"""

import sys

from peerbias_plots.render import main

if __name__ == "__main__":
    sys.exit(main())
