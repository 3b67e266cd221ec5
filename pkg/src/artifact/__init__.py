"""Transfinite sums and products, product integrals, Stieltjes product integrals,
parallel transport by projection products, and generalized ODE residuals."""

from . import algebra, gode, ordinal, prodint, stepmap, stieltjes, transfinite, transport
from .algebra import AlgebraElement, AlgebraKind
from .errors import ArtifactError

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement",
    "AlgebraKind",
    "ArtifactError",
    "algebra",
    "gode",
    "ordinal",
    "prodint",
    "stepmap",
    "stieltjes",
    "transfinite",
    "transport",
]
