import sys

from spotlab.cli import main

sys.exit(main())
