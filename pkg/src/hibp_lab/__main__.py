"""Allow ``python -m hibp_lab`` as an alias for the ``hibp-lab`` script."""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
