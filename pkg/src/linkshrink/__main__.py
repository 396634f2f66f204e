"""Module entry point so ``python -m linkshrink`` behaves like the script."""
from .cli import main

raise SystemExit(main())
