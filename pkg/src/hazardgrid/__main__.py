import sys

from hazardgrid.cli import main

sys.exit(main())
