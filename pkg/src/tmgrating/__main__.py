import sys

from tmgrating.cli import main

sys.exit(main())
