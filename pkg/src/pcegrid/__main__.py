import sys

from pcegrid.cli import main

sys.exit(main())
