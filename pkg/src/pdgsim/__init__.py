"""pdgsim: semantic code clone detection over program dependence graphs.

Pipeline: a small imperative language is lowered to a statement-level
IR, analyzed into a PDG (control + data dependence), encoded as dense
matrices, and scored by a Siamese graph attention network trained with
a hand-written reverse-mode autodiff engine.
"""

from .autodiff import ParamStore, Value, backward, grad_check, no_grad
from .dataflow import (Pdg, PdgNode, PostDomTree, ReachInfo, UnreachableExit,
                       build_pdg, compute_postdominators, control_dependences,
                       data_dependences, reaching_definitions)
from .datagen import (BUILT_IN_GROUPS, TRANSFORM_KINDS, LabeledPair,
                      format_method, generate_dataset, load_corpus, transform,
                      transform_chain, write_corpus)
from .graphcore import (EmptyGraph, FormatError, adjacency_matrix,
                        deserialize_pdg, encode_node_features, serialize_pdg,
                        to_dot)
from .ir import (IrMethod, IrStatement, LowerError, StatementKind, format_ir,
                 lower_source, lower_to_ir, parse_ir_text)
from .lexer import LexError, tokenize
from .model import (GraphTensors, ModelConfig, attention_scores, bce_loss,
                    deserialize_model, pair_score, serialize_model)
from .parser import ParseError, parse_source
from .training import (EvalReport, TrainConfig, TrainResult, evaluate,
                       prepare_pair, roc_auc, threshold_moving, train)

__version__ = "0.1.0"

__all__ = [
    "BUILT_IN_GROUPS", "EmptyGraph", "EvalReport", "FormatError",
    "GraphTensors", "IrMethod", "IrStatement", "LabeledPair", "LexError",
    "LowerError", "ModelConfig", "ParamStore", "ParseError", "Pdg", "PdgNode",
    "PostDomTree", "ReachInfo", "StatementKind", "TRANSFORM_KINDS",
    "TrainConfig", "TrainResult", "UnreachableExit", "Value",
    "adjacency_matrix", "attention_scores", "backward", "bce_loss",
    "build_pdg", "compute_postdominators", "control_dependences",
    "data_dependences", "deserialize_model", "deserialize_pdg",
    "encode_node_features", "evaluate", "format_ir", "format_method",
    "generate_dataset", "grad_check", "load_corpus", "lower_source",
    "lower_to_ir", "no_grad", "pair_score", "parse_ir_text", "parse_source",
    "prepare_pair", "reaching_definitions", "roc_auc", "serialize_model",
    "serialize_pdg", "threshold_moving", "to_dot", "tokenize", "train",
    "transform", "transform_chain", "write_corpus",
]
