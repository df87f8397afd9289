"""Nuclear eigenstates and dynamics of a two-well model with a conical intersection.

Three Hamiltonians are compared on a common grid: the Born-Oppenheimer
surface (BO), the same surface with the geometric-phase vector potential
(GP), and the full two-state diabatic model (FULL).
"""

__version__ = "0.1.0"

from .model import ModelParams  # noqa: E402
from .grid import GridSpec, Field, make_grid  # noqa: E402
from .operators import Kind, build  # noqa: E402

__all__ = ["ModelParams", "GridSpec", "Field", "make_grid", "Kind", "build", "__version__"]
