"""State-space flow fields and probability transport for quantum and classical ensembles."""
from .core import (
    DensityCheck,
    HermitianBasis,
    ShapeError,
    Superoperator,
    ValidationError,
    check_density,
    from_coords,
    hermitian_basis,
    to_coords,
    trace_inner,
    unvec,
    vec,
)
from .flow import (
    FlowField,
    LindbladTerm,
    closed_flow,
    compressibility_numeric,
    gksl_flow,
    spin_boson_flow,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .trajectory import Trajectory, integrate, purity, spin_boson_analytic

__version__ = "0.1.0"
