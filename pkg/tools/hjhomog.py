#!/usr/bin/env python3
from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
PACKAGE_SRC = REPO_ROOT / "packages" / "hjhomog" / "src"
token = str(PACKAGE_SRC)
if token not in sys.path:
    sys.path.insert(0, token)

from hjhomog.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
