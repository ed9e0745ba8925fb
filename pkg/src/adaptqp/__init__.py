"""Max-margin domain transfer with a block-structured dual transform step."""
from .adapt import (AlternationResult, MaxMarginTransfer, Method, TransformMatrix, alternate,
                    apply_transform, load_model, mmdt_w_step, mmdtl2_build_dual,
                    mmdtl2_recover_w, mmdtl2_w_step, save_model)
from .core import (CapacityError, Dataset, DegenerateProblemError, Domain, HyperParams,
                   InvalidArgumentError, PairWeighting, PairWeights, compute_pair_weights)
from .dataio import FileFormat, ParseError, gen_shifted, gen_toy_two_class, parse_features
from .qp import BoxQp, InequalityQp, solve_box_qp, solve_inequality_qp
from .svm import OneVsRestLinearSVC, SvmModel, predict, train_ovr

__version__ = "0.1.0"

__all__ = [
    "AlternationResult", "BoxQp", "CapacityError", "Dataset", "DegenerateProblemError",
    "Domain", "FileFormat", "HyperParams", "InequalityQp", "InvalidArgumentError",
    "MaxMarginTransfer", "Method", "OneVsRestLinearSVC", "PairWeighting", "PairWeights",
    "ParseError", "SvmModel", "TransformMatrix", "alternate", "apply_transform",
    "compute_pair_weights", "gen_shifted", "gen_toy_two_class", "load_model",
    "mmdt_w_step", "mmdtl2_build_dual", "mmdtl2_recover_w", "mmdtl2_w_step",
    "parse_features", "predict", "save_model", "solve_box_qp", "solve_inequality_qp",
    "train_ovr",
]
