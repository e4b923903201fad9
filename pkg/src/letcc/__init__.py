"""Learning-theoretic coded computing.

Spline-based encoding and decoding of batched computations across unreliable
workers, with Berrut and Lagrange baselines and a seeded Monte-Carlo
experiment harness.
"""

import os as _os

# Pin BLAS pools (when the user has not configured them) before numpy loads:
# trial results must be bit-identical regardless of how many harness threads
# issue linear-algebra calls concurrently.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .points import (
    InterpolationGrid,
    MeshStats,
    chebyshev_first,
    chebyshev_grid,
    chebyshev_second,
    mesh_stats,
)
from .spline import NaturalSplineBasis, SplineFit, build_basis, fit, penalty_matrix
from .kernel import KernelFit, kernel_fit, sobolev_kernel
from .coding import (
    CodedBatch,
    Dataset,
    DecodeFailure,
    DecodeResult,
    decode,
    encode,
    encoder_training_error,
)
from .baselines import (
    BerrutInterpolant,
    LagrangeCodec,
    bacc_decode,
    bacc_encode,
    berrut_eval,
    lcc_decode,
    lcc_encode,
    lcc_recovery_threshold,
)
from .sim import (
    MonteCarloResult,
    NoiseModel,
    StragglerModel,
    TrialMetrics,
    TrialSetup,
    WorkerFunction,
    WorkerReturns,
    apply_workers,
    make_worker,
    monte_carlo,
    relacc,
    run_trial,
    sample_stragglers,
)

__version__ = "0.1.0"
