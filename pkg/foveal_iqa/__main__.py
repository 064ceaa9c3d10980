"""Allow ``python -m foveal_iqa <command> ...``."""

from .cli import main

main()
