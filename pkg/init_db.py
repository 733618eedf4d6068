#!/usr/bin/env python3
"""
Database Initialization Script

This script creates the run-registry tables.
It can be run directly or imported as a module.
"""

import sys

from pbgnet.run_storage import init_run_db
from pbgnet.settings import load_settings


def main():
    """Create the run-registry tables at PBGNET_RUN_DB_URL."""
    run_db_url = load_settings().run_db_url

    print(f"Initializing run registry with URL: {run_db_url}")

    try:
        init_run_db(run_db_url)
        print("✅ Run registry initialized successfully!")
        print("Tables created:")
        print("- x_run_records")
    except Exception as e:
        print(f"❌ Failed to initialize run registry: {str(e)}")
        print("Please check your database connection and try again.")
        print(f"Error details: {type(e).__name__}: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
