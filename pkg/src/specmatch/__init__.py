"""Graph contrastive learning with a spectral graph-matching loss.

Heavy kernels run through numba when available; set ``SPECMATCH_NUMBA=0``
to force the pure-numpy path.
"""

from ._accel import backend_name
from .augment import AugmentPolicy, sample_view
from .encoder import EncoderParams, embed, encode, normalize_rows
from .graph import Dataset, Graph, generate_sbm, load_dataset, save_dataset
from .loss import LossConfig, build_view_graph, info_nce, spec_match_loss, total_loss
from .metrics import alignment_loss, linear_probe, uniformity_loss
from .runner import RunLog, TrainConfig, run_fig3, sweep, train
from .spectral import eigh, heat_kernel, lambda2

__version__ = "0.1.0"

__all__ = [
    "AugmentPolicy",
    "Dataset",
    "EncoderParams",
    "Graph",
    "LossConfig",
    "RunLog",
    "TrainConfig",
    "alignment_loss",
    "backend_name",
    "build_view_graph",
    "eigh",
    "embed",
    "encode",
    "generate_sbm",
    "heat_kernel",
    "info_nce",
    "lambda2",
    "linear_probe",
    "load_dataset",
    "normalize_rows",
    "run_fig3",
    "sample_view",
    "save_dataset",
    "spec_match_loss",
    "sweep",
    "total_loss",
    "train",
    "uniformity_loss",
]
