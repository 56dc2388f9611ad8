import sys

from taap_ring.cli import main

sys.exit(main())
