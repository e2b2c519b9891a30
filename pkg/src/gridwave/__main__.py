"""Allow running gridwave as ``python -m gridwave``."""

from gridwave.cli import main

main()
