#!/usr/bin/env python3
"""
Main entry point for AAM.

This allows running the application with:
python -m aam
"""

from aam.cli.main import main

if __name__ == "__main__":
    main()
