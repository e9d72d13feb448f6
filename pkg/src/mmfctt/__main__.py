import sys

from mmfctt.cli import main

sys.exit(main())
