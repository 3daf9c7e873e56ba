"""Spectral computation of effective transport in uniaxial polycrystals on periodic lattices."""
from .errors import (
    ArgumentError,
    ConfigError,
    NumericalError,
    PoleProximityError,
    PolyspecError,
    RankDeficientError,
    SingularSystemError,
    SpecMismatchError,
    UnsupportedDimensionError,
)
from .fields import (
    FieldGrid,
    assemble_E_J,
    helmholtz_decompose,
    resolve_current,
    resolve_X1E,
)
from .lattice import (
    DiscreteOperator,
    LatticeSpec,
    build_curl,
    build_divergence,
    build_gradient,
    build_partial,
)
from .oracle import DirectSolution, solve_direct
from .polycrystal import (
    ContrastParams,
    IndicatorMatrices,
    OrientationField,
    realize_indicators,
    sample_orientations,
    uniform_orientations,
)
from .projection import ProjectionSet, SubspaceSVD, build_projections, svd_split
from .spectral import (
    BlockEig,
    Pairing,
    SpectralFunction,
    SpectralMeasure,
    eig_block,
    ensemble_spectral_function,
    measure_atoms,
    moments,
    reduced_block,
)
from .transport import (
    EffectiveTensor,
    effective_conductivity,
    effective_resistivity,
    stieltjes_eval,
)

__version__ = "0.1.0"
