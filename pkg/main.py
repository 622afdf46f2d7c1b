"""jcdyn - Main entry point"""
import sys

from jcdyn.cli import main

if __name__ == "__main__":
    sys.exit(main())
