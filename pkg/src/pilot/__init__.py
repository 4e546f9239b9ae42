"""Regularized linear model trees.

Greedy recursive partitioning where every node fits one of five univariate
models (constant, linear, piecewise constant, broken linear, two-piece
linear) chosen by BIC, with truncation safeguards at training and
prediction time, impurity-gain feature importance, JSON serialization, and
a small evaluation harness.
"""

__version__ = "0.1.0"

from .build import (PilotTree, StopReason, TrainDiagnostics, TreeNode,
                    build_tree, check_stop, iter_nodes, truncate_cumulative)
from .data import (CenteredResponse, ColumnKind, ColumnMeta, Dataset,
                   Hyperparams, center_response, from_arrays, ingest_csv,
                   presort, write_csv)
from .errors import IngestError, PilotError, PredictError, SchemaError
from .evalharness import (CartNode, EvalEntry, EvalReport, cart_oracle,
                          cart_oracle_predict, fold_assignments, gen_additive,
                          gen_linear, gen_piecewise, kfold_cv, time_training,
                          yeo_johnson_apply, yeo_johnson_fit,
                          yeo_johnson_inverse)
from .interpret import (SCHEMA_VERSION, ImportanceVector, feature_importance,
                        load_model, render_text, save_model)
from .kinds import ModelKind
from .predict import PredictionTrace, TraceStep, predict_batch, predict_one
from .scan import (Moments, NodeFit, SelectionResult, SplitScanState,
                   bic_score, constant_node_fit, fit_con, fit_lin,
                   scan_categorical_predictor, scan_numeric_predictor,
                   select_model)

__all__ = [
    "__version__",
    "SCHEMA_VERSION",
    "PilotError", "IngestError", "PredictError", "SchemaError",
    "ModelKind", "ColumnKind", "ColumnMeta", "Dataset", "CenteredResponse",
    "Hyperparams", "center_response", "from_arrays", "ingest_csv", "presort",
    "write_csv",
    "Moments", "NodeFit", "SelectionResult", "SplitScanState", "bic_score",
    "constant_node_fit", "fit_con", "fit_lin", "scan_categorical_predictor",
    "scan_numeric_predictor", "select_model",
    "PilotTree", "StopReason", "TrainDiagnostics", "TreeNode", "build_tree",
    "check_stop", "iter_nodes", "truncate_cumulative",
    "PredictionTrace", "TraceStep", "predict_batch", "predict_one",
    "ImportanceVector", "feature_importance", "load_model", "render_text",
    "save_model",
    "CartNode", "EvalEntry", "EvalReport", "cart_oracle",
    "cart_oracle_predict", "fold_assignments", "gen_additive", "gen_linear",
    "gen_piecewise", "kfold_cv", "time_training", "yeo_johnson_apply",
    "yeo_johnson_fit", "yeo_johnson_inverse",
]
