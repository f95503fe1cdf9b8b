"""
Entry point for running obbassign as a Python module.
"""
from obbassign.cli import main

if __name__ == '__main__':
    main()
