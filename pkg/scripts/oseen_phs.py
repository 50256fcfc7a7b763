import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from oseen_phs.cli import main  # noqa: E402


if __name__ == "__main__":
    raise SystemExit(main())
