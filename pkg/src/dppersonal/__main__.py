import sys

from dppersonal.harness.cli import main

sys.exit(main())
