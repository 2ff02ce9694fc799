"""Conjugate functions on R^3: jets, conformal invariants, directions and reconstruction."""

from .errors import *  # noqa: F401,F403
from .jet3 import Jet3, coordinate_jet, constant_jet  # noqa: F401
from .expr import parse, eval_jet, evaluate, to_string  # noqa: F401

__version__ = "0.1.0"
