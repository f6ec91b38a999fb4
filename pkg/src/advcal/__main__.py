import sys

from advcal.cli import main

sys.exit(main())
