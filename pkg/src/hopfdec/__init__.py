"""hopfdec: discrete Hopf invariants of low-rank maps and Heisenberg-group geometry.

Submodules:
    heisenberg  group law, frame, horizontal lifts, Carnot-Caratheodory distance
    complex     simplicial meshes of S^3, S^2, S^1 and cones over them
    cochain     cochains, coboundary, cup product, primitives, Hodge splitting
    forms       smooth forms on R^m and their quadrature pullbacks
    hopf        sampled maps, the Hopf invariant pipeline and the linking oracle
    maps        builtin maps and rank / contact analyzers
"""

from ._kernels import backend_name
from .cochain import Cochain, coboundary, cup, integrate_top, solve_primitive
from .complex import (ConeComplex, SimplicialComplex, build_cone_mesh, build_sphere2_mesh,
                      build_sphere3_mesh, load_mesh, save_mesh)
from .forms import FormSpec, builtin_form, s2_area_extended
from .heisenberg import HeisPoint, cc_distance, group_inv, group_mul, lift_curve
from .hopf import (ClosednessError, HopfReport, SampledMap, homotopy_sweep, hopf, hopf_scaled,
                   linking_oracle)
from .maps import (MapSpec, contact_check, figure_eight_embedding, hopf_fibration_map,
                   radial_extension, rank_profile, resolve_map)

__version__ = "0.1.0"
