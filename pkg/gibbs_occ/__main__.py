import sys

from gibbs_occ.cli import main

sys.exit(main())
