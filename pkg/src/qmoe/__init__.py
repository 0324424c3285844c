"""Query-specialization mixture-of-experts toolkit for dense retrieval.

Trains a residual mixture of per-domain specializers over frozen query
embeddings, labels queries with domains via a category graph, and ships a
full retrieval-evaluation harness (exact top-k search, ranking metrics,
paired significance tests, synthetic benchmark).
"""

from .checkpoint import CheckpointMeta, load_checkpoint, save_checkpoint
from .embio import EmbeddingStore, read_embeddings, write_embeddings
from .errors import CheckpointError, InputError, NumericalError, QmoeError
from .evaluation import (evaluate_run, map_at_k, mrr_at_k, ndcg_at_k, p_at_1,
                         read_qrels, read_run, recall_at_k, retrieve,
                         retrieve_all, write_qrels, write_run)
from .labeling import (CategoryGraph, LabelingStats, build_labels, label_query,
                       load_category_graph, load_doc_categories,
                       load_label_file, resolve_top_categories,
                       write_label_file)
from .linalg import glorot_uniform_init, matvec, relu, sigmoid
from .losses import bce_loss, contrastive_loss
from .model import (MoEParams, gate_forward, init_params, moe_transform,
                    pool_top1, pool_weighted, random_gate, specializer_forward,
                    transform_batch, zero_params)
from .rng import Rng
from .stats import paired_ttest_bonferroni, student_t_sf2
from .synth import SynthBenchmark, synth_benchmark, write_benchmark
from .training import (AdamState, Batch, EpochLog, TrainConfig,
                       TrainingExample, adam_step, grad_check, total_loss,
                       train)

__version__ = "0.1.0"
