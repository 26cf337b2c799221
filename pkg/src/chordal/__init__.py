"""chordal: semiclassical expectation values for one-dimensional systems.

States are carried by sampled Lagrangian curves; time-dependent operator
expectation values are assembled as a classical transport term plus
interference corrections from nearly coincident sheets of the evolved
curve, every stage validated against an exact grid solver.
"""

from .geometry import PhasePoint, LinearSymplecticMap, PhaseGrid, wedge
from .manifold import (Manifold1D, CausticRecord, build_from_graph,
                       build_circle, build_line, action_between,
                       maslov_between, ebk_check, reparametrize)
from .dynamics import (SplitHamiltonian, KickedMap, harmonic_oscillator,
                       quartic_oscillator, standard_map, flow, tangent_map,
                       propagate_manifold, estimate_tsc)
from .observables import (Observable, obs_q, obs_p, obs_q2, obs_energy,
                          gaussian_observable, cylinder_gaussian_observable)
from .quantum import (GridSpec, GridState, to_momentum, to_position, overlap,
                      propagate_exact, wigner_exact, weyl_quantize,
                      operator_wigner, expectation_exact, build_maslov_state)

__version__ = "0.1.0"
