"""Boundary-element solver for the cell-by-cell model of cardiac tissue.

Subdomain Laplace problems are reduced to discrete Dirichlet-to-Neumann
maps on the cell boundaries, coupled through a Lagrange-multiplier saddle
system, and condensed to an ODE for the transmembrane voltage that is
integrated with a stabilized explicit Chebyshev method.
"""

from .bem import LayerOperators, assemble_layers, greens, greens_normal
from .coupling import (CoupledSystem, UnicellSystem, build_coupled,
                       build_steklov_maps, build_unicell, psi,
                       recover_all_potentials)
from .geometry import (Connectivity, ParamCurve, Scene, Segment,
                       build_cell_array, build_nested_pair, build_single_cell,
                       build_split_circle, connectivity, fourier_closed_curve)
from .harness import (CVConfig, CVProtocol, run_convergence, run_cv, run_sweep)
from .integrator import (SplitRHS, StepperConfig, estimate_spectral_radius,
                         rkc_step, simulate)
from .ionic import (FitzHughNagumo, IonicModel, MembraneState,
                    MitchellSchaeffer, Stimulus, builtin_models, eval_rhs)
from .steklov import (SteklovOperator, exterior_dtn, interior_dtn,
                      multi_boundary_dtn, regularize)

__version__ = "0.1.0"
