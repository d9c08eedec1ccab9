"""Frobenius-invariant paths on the p-adic projective line.

Computes the p-adic Drinfel'd associator and p-adic multiple zeta values for
unipotent logarithmic connections on P^1 minus marked points, with exact
per-digit precision tracking and divided-power integrality audits.
"""

from .connection import (
    DivisorConfig,
    FibreFunctorSpec,
    make_config,
    mzv_config,
    tiny_transport,
)
from .errors import PadicPathsError
from .frobenius import (
    Associator,
    EngineParams,
    associator,
    dp_ideal_valuation,
    integrality_report,
    mzv_report,
    pmzv,
)
from .freealg import NcSeries, is_group_like, nc_inverse, shuffle
from .padic import PAdic, Zp

__all__ = [
    "Associator",
    "DivisorConfig",
    "EngineParams",
    "FibreFunctorSpec",
    "NcSeries",
    "PAdic",
    "PadicPathsError",
    "Zp",
    "associator",
    "dp_ideal_valuation",
    "integrality_report",
    "is_group_like",
    "make_config",
    "mzv_config",
    "mzv_report",
    "nc_inverse",
    "pmzv",
    "shuffle",
    "tiny_transport",
]

__version__ = "0.1.0"
