import sys

from edt_lab.main import main

sys.exit(main())
