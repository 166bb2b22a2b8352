"""Strategic model checking for ATL* over finite and infinite traces."""

from .cgs import Cgs, CgsError, parse_model
from .driver import CheckRequest, CheckResult, check
from .formula import Formula, ParseError, parse_formula

__version__ = "0.1.0"

__all__ = [
    "Cgs", "CgsError", "parse_model",
    "CheckRequest", "CheckResult", "check",
    "Formula", "ParseError", "parse_formula",
    "__version__",
]
