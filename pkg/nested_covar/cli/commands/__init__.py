# Subcommands; each module registers its parser and handler
from . import estimate, experiment, fit, price, reference, simulate, tune

COMMANDS = (price, simulate, fit, estimate, experiment, reference, tune)

__all__ = ["COMMANDS"]
