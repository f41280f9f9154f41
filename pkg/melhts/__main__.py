import sys

from melhts.main import main

sys.exit(main())
