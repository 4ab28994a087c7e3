import sys

from rydpulse.cli import main

sys.exit(main())
