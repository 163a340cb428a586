import sys

from lmm_select.cli import main

sys.exit(main())
