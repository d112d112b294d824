import sys

from laxtop.cli import main

sys.exit(main())
