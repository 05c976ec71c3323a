"""Grand-canonical and stationary states of quadratic fermion models in the operator (second) space."""

from .canonical import CanonicalFactorization, GivensSchedule, Rotation, apply_givens, fold_to_identity, youla_factorize
from .liouvillian import (
    NessResult,
    StructureMatrix,
    SuperOperator,
    build_structure_matrix,
    build_superoperator,
    ness_kernel,
    ness_product_form,
)
from .model import (
    ArgumentMatrices,
    BathSet,
    BlockPartition,
    CoefficientMatrix,
    PreconditionError,
    ThermoParams,
    argument_matrices,
    fermi_dirac,
    grand_partition_closed_form,
    irreducibility_check,
    single_body_spectrum,
)
from .mps import BondOverflowError, CanonicalMPS, inner_product, network_overlap, product_state
from .stationary import (
    Block,
    Theorem1Config,
    Theorem2Config,
    bath_ratio,
    theorem1_baths,
    theorem1_state,
    theorem2_baths,
    theorem2_state,
    thermal_match,
    verify_stationarity,
)
from .thermo import IntegrityError, ThermoState, build_thermo_state, partition_function_from_state

__version__ = "0.1.0"
