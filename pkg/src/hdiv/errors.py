"""Exception types raised by hdiv.

Each class carries a short ``category`` string used by the command line
interface when it reports a failure.
"""
from __future__ import annotations

import numpy as np


class HdivError(Exception):
    category = "error"


class ConfigError(HdivError, ValueError):
    category = "config"


class InsufficientInstrumentsError(ConfigError):
    """More relevant covariates than instruments: the model is not identified."""


class NotPositiveDefiniteError(HdivError, np.linalg.LinAlgError):
    category = "numeric"


class DegenerateInstrumentError(HdivError, ValueError):
    category = "data"


class SingularGramError(HdivError, np.linalg.LinAlgError):
    category = "numeric"


class DegreesOfFreedomError(HdivError, ValueError):
    category = "numeric"


class TooFewObservationsError(HdivError, ValueError):
    category = "data"


class TruthUnavailableError(HdivError, ValueError):
    category = "data"


class SchemaError(HdivError, ValueError):
    category = "schema"
