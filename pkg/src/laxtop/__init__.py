"""Lax pairs, spectral curves and algebro-geometric integration for heavy rigid bodies."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from laxtop._backend import DEFAULT as DEFAULT_BACKEND  # noqa: E402
from laxtop.dynamics import BodyParams3D, BodyParamsND, EPState, Trajectory, integrate  # noqa: E402
from laxtop.lax import lax_pair, lax_residual, spectral_coeffs_3d  # noqa: E402

__all__ = [
    "DEFAULT_BACKEND",
    "BodyParams3D",
    "BodyParamsND",
    "EPState",
    "Trajectory",
    "integrate",
    "lax_pair",
    "lax_residual",
    "spectral_coeffs_3d",
]
