#!/usr/bin/env python3
"""
AUV formation simulator - command-line launcher.

Runs the ``auvsim`` application from a source checkout without installing it.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "src"))

from auv_formation.app import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
