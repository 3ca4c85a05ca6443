import sys

from polarmem.main import main

sys.exit(main())
