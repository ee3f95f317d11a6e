"""
Run the nested CoVaR command-line interface
"""
import sys

from nested_covar.cli import main

if __name__ == "__main__":
    sys.exit(main())
