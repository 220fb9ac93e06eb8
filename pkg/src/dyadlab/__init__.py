"""Desk-scale workbench for dyadic Hardy-space analysis.

Finite dyadic signals, random shifted lattices, martingale square
functions and their randomized H^1 norms, Lusin area integrals from
exact Poisson extensions, kernel decay checks, BMO scans, and
cube-indexed sequence-space norms.  Everything is seeded, exact where
the mathematics is exact, and small enough to rerun interactively.
"""

from .bmo import BmoReport, FamilyBmoReport, averaged_family_bmo, bmo_norm
from .grid import (
    Box,
    GridFunction,
    embed,
    from_json_dict,
    lp_norm,
    load_signal,
    make_grid_function,
    save_signal,
    to_json_dict,
    translate,
)
from .kernel import (
    DecayFitReport,
    KernelSlice,
    check_t1,
    decay_fit,
    kernel_norm,
    kernel_slice,
    kernel_slice_family,
    kernel_smoothness,
)
from .lattice import (
    Cell,
    DyadicLattice1D,
    ProductLattice,
    SizeLimitError,
    cube_containing,
    enumerate_shifts,
    sample_lattice,
    sample_product_lattice,
    sample_shifts,
)
from .lusin import (
    ConeQuadrature,
    FixedDyadicAxis,
    HarmonicExtension,
    LusinAxis,
    RandomDyadicAxis,
    cone_tail_bound,
    default_quadrature,
    lusin_square_function,
    mixed_square_function,
    multiparam_lusin,
    poisson_extend,
)
from .martingale import (
    MartingaleDecomposition,
    cell_average,
    decompose,
    local_difference,
    martingale_difference,
)
from .seqspace import (
    CubeMatrix,
    DyadicSequence,
    almost_diagonal_constant,
    apply_children_sum_T,
    pairing,
    sequences_a_b,
    tl_norm,
)
from .sqfn import (
    H1NormReport,
    RandomizedSquareMean,
    SquareFunctionField,
    averaged_square_function,
    child_slot_adjoint,
    child_slot_field,
    default_child_signs,
    fixed_h1_norm,
    randomized_h1_norm,
    randomized_square_mean,
    square_function,
    square_function_field,
    translation_average,
    truncation_tail_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "GridFunction",
    "make_grid_function",
    "embed",
    "translate",
    "lp_norm",
    "to_json_dict",
    "from_json_dict",
    "save_signal",
    "load_signal",
    "SizeLimitError",
    "Cell",
    "DyadicLattice1D",
    "ProductLattice",
    "sample_lattice",
    "sample_shifts",
    "enumerate_shifts",
    "cube_containing",
    "sample_product_lattice",
    "MartingaleDecomposition",
    "cell_average",
    "martingale_difference",
    "local_difference",
    "decompose",
    "SquareFunctionField",
    "RandomizedSquareMean",
    "H1NormReport",
    "square_function",
    "averaged_square_function",
    "square_function_field",
    "child_slot_field",
    "child_slot_adjoint",
    "default_child_signs",
    "randomized_square_mean",
    "randomized_h1_norm",
    "fixed_h1_norm",
    "translation_average",
    "truncation_tail_bound",
    "ConeQuadrature",
    "HarmonicExtension",
    "LusinAxis",
    "FixedDyadicAxis",
    "RandomDyadicAxis",
    "default_quadrature",
    "poisson_extend",
    "cone_tail_bound",
    "lusin_square_function",
    "multiparam_lusin",
    "mixed_square_function",
    "KernelSlice",
    "DecayFitReport",
    "kernel_slice",
    "kernel_slice_family",
    "kernel_norm",
    "kernel_smoothness",
    "decay_fit",
    "check_t1",
    "BmoReport",
    "FamilyBmoReport",
    "bmo_norm",
    "averaged_family_bmo",
    "DyadicSequence",
    "CubeMatrix",
    "tl_norm",
    "pairing",
    "almost_diagonal_constant",
    "apply_children_sum_T",
    "sequences_a_b",
    "__version__",
]
