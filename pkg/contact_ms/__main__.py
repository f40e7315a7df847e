"""Allow running as: python -m contact_ms"""
from .cli import main

if __name__ == "__main__":
    main()
