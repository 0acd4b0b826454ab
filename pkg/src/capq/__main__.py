import sys

from capq.cli import main

sys.exit(main())
