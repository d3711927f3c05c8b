"""
Energy absorption interferometry toolkit.

Synthesise dissipative response tensors, simulate two-source fringe
campaigns, reconstruct the tensor through a dual basis and decompose it
into natural absorption modes.
"""
from .errors import (
    DataError,
    DimensionError,
    EAIError,
    FormatError,
    LatticeError,
    MaskError,
    PreconditionError,
    ProtocolError,
    RankError,
)
from .interferometer import (
    FOUR_PHASES,
    TWO_PHASES,
    FringeRecord,
    MeasuredMatrix,
    extract_visibility,
    fringe_power,
    run_campaign,
    time_average_oracle,
    visibility_map,
)
from .kdomain import (
    KGrid,
    circulant_ring,
    diagonality,
    from_kdomain,
    kdomain_power,
    kgrid,
    to_kdomain,
    to_kdomain_force,
    transform_matrix,
)
from .modes import (
    CrossProjection,
    ModeSet,
    coupling_matrix,
    cross_modes,
    joint_modes,
    modal_power,
    mode_count,
    natural_modes,
    principal_angles,
    project_cross_onto_self,
    range_inclusion,
    wrap_scattering,
)
from .reconstruct import (
    IncrementalDualBasis,
    ReconstructionResult,
    convergence_metric,
    extend_measured,
    measurement_filter,
    propagated_noise,
    reconstruct_response,
)
from .sources import (
    TAU_SVD,
    CatalogEntry,
    DualBasis,
    SourceCatalog,
    dual_basis,
    plane_wave_probe,
    point_probe,
    source_matrix,
    uniform_probe,
)
from .synth import (
    Assembly,
    ModeSpec,
    assemble_full,
    from_cross_pairs,
    from_self_modes,
    local_absorber,
    random_psd_system,
)
from .tensor import (
    TAU_HERM,
    TAU_PSD,
    BlockResponseMatrix,
    CoherenceMatrix,
    ForceVector,
    Lattice,
    SampleGrid,
    ValidationReport,
    absorbed_power_coherent,
    absorbed_power_ensemble,
    anti_hermitian_part,
    hs_norm,
    validate,
)

__version__ = "0.1.0"
