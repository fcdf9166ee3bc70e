import sys

from termbench.cli import main

sys.exit(main())
