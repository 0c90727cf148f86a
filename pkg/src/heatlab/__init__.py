"""heatlab: heat-kernel bounds for nonlocal diffusion on periodic lattices.

Time-dependent symmetric jump kernels on a torus are stepped with backward
Euler. The discrete heat kernels are then compared against the power-law
envelopes of the continuum theory by fitting a constant and checking that it
is stable under refinement.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, HeatlabError, InputError, ParameterError,  # noqa: E402
                     PreconditionError, ResourceError, ShapeError)
from .kernels import (JumpKernel, KernelParams, check_coercivity, check_symmetry,  # noqa: E402
                      check_upper_bound, custom_kernel, estimate_coercivity, make_preset, truncate)
from .lattice import Generator, Lattice, assemble_generator, dirichlet_form, gagliardo_seminorm  # noqa: E402
from .reports import BoundReport, CheckReport  # noqa: E402
from .semigroup import (GridField, Propagator, Schedule, build_propagator, check_maximum_principle,  # noqa: E402
                        evolve, exact_propagator, fundamental_solution)

__all__ = [
    "__version__",
    "HeatlabError", "ParameterError", "DomainError", "ShapeError", "InputError", "ResourceError",
    "PreconditionError", "ConfigError",
    "KernelParams", "JumpKernel", "make_preset", "custom_kernel", "truncate", "check_upper_bound",
    "check_symmetry", "estimate_coercivity", "check_coercivity",
    "Lattice", "Generator", "assemble_generator", "dirichlet_form", "gagliardo_seminorm",
    "Schedule", "GridField", "Propagator", "evolve", "fundamental_solution", "build_propagator",
    "exact_propagator", "check_maximum_principle",
    "CheckReport", "BoundReport",
]
