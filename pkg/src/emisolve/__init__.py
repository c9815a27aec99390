"""EMI block systems on structured grids: assembly, symbols, solvers, bounds."""

from .grid import DofClassification, GridError, GridSpec, build_grid, gamma_pairing
from .sparsemat import SparseSymMatrix, as_csr, write_matrix_market, write_vector_csv
from .symbols import (
    CompositeSymbolG,
    SymbolFn,
    build_toeplitz,
    composite_symbol,
    count_matched_sizes,
    eval_symbol,
    mass_symbol_1d,
    reblock_symbol,
    sample_rearranged,
    stiffness_symbol_1d,
    stiffness_symbol_2d,
)
from .assembly import (
    AssemblyError,
    EmiSystem,
    SplitPair,
    assemble_membrane,
    assemble_rhs,
    assemble_stiffness,
    assemble_system,
    build_system,
    sine_source,
    split_B_R,
    unit_rhs,
)
from .spectra import (
    EsdDiscrepancy,
    SpectrumReport,
    dense_spectrum,
    esd_discrepancy,
    extremal_eigs,
)
from .krylov import (
    IndefiniteOperatorError,
    PreconditionerError,
    SolveConfig,
    SolveReport,
    cg_solve,
    make_preconditioner,
)
from .multigrid import MgConfig, MgHierarchy, MgPreconditioner, build_hierarchy, v_cycle
from .bounds import (
    LemmaInputs,
    OutlierReport,
    axelsson_bound,
    cluster_report,
    outlier_report,
)

__version__ = "0.1.0"
