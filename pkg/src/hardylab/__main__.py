import sys

from hardylab.cli import main

sys.exit(main())
