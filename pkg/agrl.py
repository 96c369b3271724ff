import sys

from src.cli import main

## Usage: python agrl.py <train|eval|bench|gradcheck|list-goals> [options]

if __name__ == "__main__":
    sys.exit(main())
