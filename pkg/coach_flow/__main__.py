import sys

from coach_flow.cli.main import main

sys.exit(main())
