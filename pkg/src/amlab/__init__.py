"""amlab: angular momentum of a Dirac spinor coupled to its own electromagnetic field.

Quadrature on uniform 3D grids in units hbar = c = m = 1 (Gaussian
electromagnetic units), with free-space Green's-function field solvers.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .grid import Grid3, PhysicalParams, ScalarField, SpinorField, VectorField  # noqa: E402
from .dirac import scenario  # noqa: E402
from .decompose import decompose, momentum_decompose, verify_cancellation  # noqa: E402

__all__ = [
    "Grid3",
    "PhysicalParams",
    "ScalarField",
    "SpinorField",
    "VectorField",
    "scenario",
    "decompose",
    "momentum_decompose",
    "verify_cancellation",
    "__version__",
]
