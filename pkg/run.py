#!/usr/bin/env python3
"""
Main entry point for the altisplat command line.
"""

import sys

from src.app import cli_main

if __name__ == "__main__":
    sys.exit(cli_main())
