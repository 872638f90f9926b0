import sys

from snnmimo.cli import main

sys.exit(main())
