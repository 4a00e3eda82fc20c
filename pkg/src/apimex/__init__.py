"""IMEX Runge-Kutta schemes for hyperbolic systems with diffusive relaxation.

Subpackages by task:

* ``tableaux``: IMEX Butcher pairs, order conditions, classification.
* ``mesh``: grids, ghost cells, WENO/central reconstructions, Laplacians.
* ``models``: relaxation problems and their reference solutions.
* ``integrators``: BPR and partitioned IMEX time stepping.
* ``stability``: Fourier analysis of the first-order scheme.
* ``transport``: even-odd neutron transport and its diffusion limit.
* ``harness`` / ``cli``: experiment configs, convergence studies, artifacts.
"""
from .errors import ApimexError
from .tableaux import IMEXTableau, builtin

__all__ = ["ApimexError", "IMEXTableau", "builtin"]
__version__ = "0.1.0"
