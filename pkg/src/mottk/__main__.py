import sys

from mottk.cli import main

sys.exit(main())
