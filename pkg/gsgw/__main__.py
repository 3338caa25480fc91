"""Allow ``python -m gsgw``."""
import sys

from gsgw.main import main

sys.exit(main())
