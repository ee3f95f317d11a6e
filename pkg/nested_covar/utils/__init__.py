# Utils module
from .validators import *

__all__ = ["validators"]
