"""Allow `python -m fedpoison ...`."""

import sys

from .cli import main

sys.exit(main())
