import sys

from evoinclusion.cli import main

sys.exit(main())
