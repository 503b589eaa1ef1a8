"""kscale: energy-consumption forecasting and Kardashev-index projection.

A forest of CART regression trees maps economic and climate drivers to
national energy consumption; an ARIMA model projects the selected-countries
share of the world total; the two combine into global annual energy and its
position K on the Kardashev scale, including a two-branch fusion-advent
extrapolation. Hot kernels run from a compiled extension when available and
from a bit-compatible NumPy fallback otherwise.
"""

__version__ = "0.1.0"

from ._backend import active_backend

__all__ = ["__version__", "active_backend"]
