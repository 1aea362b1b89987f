import sys

from diacnn.cli.main import main

sys.exit(main())
