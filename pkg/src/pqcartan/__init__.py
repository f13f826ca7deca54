"""Signed Cartan decomposition machinery and counting experiments for PSL_d.

Projections, cocycles and Gromov products attached to a signature-(p,q)
form on R^d or C^d, plus certified free-group representation builders and
desk-scale orbit-growth experiments over them.
"""

from .forms import Form
from .flags import Flag
from .numerics import ScaledMatrix
from .pq_cartan import distance_So, membership, pq_project
from .projections import cartan, jordan

__all__ = [
    "Form",
    "Flag",
    "ScaledMatrix",
    "cartan",
    "jordan",
    "membership",
    "pq_project",
    "distance_So",
]

__version__ = "0.1.0"
