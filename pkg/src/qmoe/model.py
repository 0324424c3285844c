"""Query-specialization mixture-of-experts module.

A trained model maps one query embedding to another of the same dimension:
a multi-label sigmoid gate scores the query against M domains, one
bottleneck feed-forward specializer per domain proposes a domain-specific
correction, the corrections are pooled by the gate scores (weighted sum,
or top-1 selection), and a skip connection adds the pooled correction to
the original embedding. With all gate scores near zero the module returns
the query unchanged, so out-of-domain queries pass through untouched.

Document embeddings are never transformed; the document side of retrieval
is an identity passthrough by contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .linalg import glorot_uniform_init, relu, sigmoid
from .rng import Rng

POOL_MODES = ("weighted", "top1")
GATE_NORMALIZATIONS = ("none", "sum")


@dataclass
class SpecializerParams:
    """Bottleneck FFN: project to d/2, ReLU, project back to d."""

    w_down: np.ndarray  # (d/2, d)
    b_down: np.ndarray  # (d/2,)
    w_up: np.ndarray    # (d, d/2)
    b_up: np.ndarray    # (d,)


@dataclass
class GatingParams:
    """Three-layer classifier: d -> 2d -> 4d -> M, ReLU between layers,
    sigmoid on the output so each domain is scored independently."""

    w1: np.ndarray     # (2d, d)
    b1: np.ndarray     # (2d,)
    w2: np.ndarray     # (4d, 2d)
    b2: np.ndarray     # (4d,)
    w_out: np.ndarray  # (M, 4d)
    b_out: np.ndarray  # (M,)


@dataclass
class MoEParams:
    gating: GatingParams
    specializers: list[SpecializerParams]
    dim: int
    num_domains: int

    @property
    def dtype(self):
        return self.gating.w1.dtype


DEFAULT_NUM_DOMAINS = 37


def init_params(dim: int, num_domains: int = DEFAULT_NUM_DOMAINS, rng: Rng | None = None,
                dtype=np.float32, residual_init: str = "zero") -> MoEParams:
    """Fresh parameters: Glorot-uniform weights, zero biases.

    The specializer up-projections default to zero ("zero"), so a fresh
    model is exactly the identity on queries and training walks away from
    the skip connection instead of first having to undo a random residual.
    ``residual_init="glorot"`` initializes them like every other weight.
    dim must be even; the bottleneck projects to exactly dim/2.
    """
    if dim < 2 or dim % 2 != 0:
        raise InputError(f"embedding dimension must be even and >= 2, got {dim}")
    if num_domains < 1:
        raise InputError(f"num_domains must be >= 1, got {num_domains}")
    if residual_init not in ("zero", "glorot"):
        raise InputError(f"unknown residual_init {residual_init!r}")
    if rng is None:
        rng = Rng(0)
    half = dim // 2
    gating = GatingParams(
        w1=glorot_uniform_init(2 * dim, dim, rng, dtype),
        b1=np.zeros(2 * dim, dtype=dtype),
        w2=glorot_uniform_init(4 * dim, 2 * dim, rng, dtype),
        b2=np.zeros(4 * dim, dtype=dtype),
        w_out=glorot_uniform_init(num_domains, 4 * dim, rng, dtype),
        b_out=np.zeros(num_domains, dtype=dtype),
    )
    specializers = [
        SpecializerParams(
            w_down=glorot_uniform_init(half, dim, rng, dtype),
            b_down=np.zeros(half, dtype=dtype),
            w_up=(glorot_uniform_init(dim, half, rng, dtype)
                  if residual_init == "glorot"
                  else np.zeros((dim, half), dtype=dtype)),
            b_up=np.zeros(dim, dtype=dtype),
        )
        for _ in range(num_domains)
    ]
    return MoEParams(gating=gating, specializers=specializers,
                     dim=dim, num_domains=num_domains)


def zero_params(dim: int, num_domains: int = DEFAULT_NUM_DOMAINS,
                dtype=np.float32) -> MoEParams:
    """All-zero parameters; the transform is then exactly the identity."""
    if dim < 2 or dim % 2 != 0:
        raise InputError(f"embedding dimension must be even and >= 2, got {dim}")
    if num_domains < 1:
        raise InputError(f"num_domains must be >= 1, got {num_domains}")
    half = dim // 2
    gating = GatingParams(
        w1=np.zeros((2 * dim, dim), dtype=dtype), b1=np.zeros(2 * dim, dtype=dtype),
        w2=np.zeros((4 * dim, 2 * dim), dtype=dtype), b2=np.zeros(4 * dim, dtype=dtype),
        w_out=np.zeros((num_domains, 4 * dim), dtype=dtype),
        b_out=np.zeros(num_domains, dtype=dtype),
    )
    specializers = [
        SpecializerParams(
            w_down=np.zeros((half, dim), dtype=dtype), b_down=np.zeros(half, dtype=dtype),
            w_up=np.zeros((dim, half), dtype=dtype), b_up=np.zeros(dim, dtype=dtype),
        )
        for _ in range(num_domains)
    ]
    return MoEParams(gating=gating, specializers=specializers,
                     dim=dim, num_domains=num_domains)


def named_arrays(params: MoEParams) -> list[tuple[str, np.ndarray]]:
    """All parameter arrays in their one declared order.

    This order defines the checkpoint layout, the optimizer state layout,
    and the traversal order of the gradient checker.
    """
    g = params.gating
    out = [
        ("gating.w1", g.w1), ("gating.b1", g.b1),
        ("gating.w2", g.w2), ("gating.b2", g.b2),
        ("gating.w_out", g.w_out), ("gating.b_out", g.b_out),
    ]
    for i, s in enumerate(params.specializers):
        out += [
            (f"specializers.{i}.w_down", s.w_down),
            (f"specializers.{i}.b_down", s.b_down),
            (f"specializers.{i}.w_up", s.w_up),
            (f"specializers.{i}.b_up", s.b_up),
        ]
    return out


def clone_params(params: MoEParams) -> MoEParams:
    gating = GatingParams(**{k: v.copy() for k, v in vars(params.gating).items()})
    specializers = [
        SpecializerParams(**{k: v.copy() for k, v in vars(s).items()})
        for s in params.specializers
    ]
    return MoEParams(gating=gating, specializers=specializers,
                     dim=params.dim, num_domains=params.num_domains)


def params_equal(a: MoEParams, b: MoEParams) -> bool:
    if a.dim != b.dim or a.num_domains != b.num_domains:
        return False
    return all(np.array_equal(x, y) for (_, x), (_, y) in
               zip(named_arrays(a), named_arrays(b)))


# ---------------------------------------------------------------------------
# Batched forward passes (rows of X are independent query embeddings)
# ---------------------------------------------------------------------------

def _as_batch(x: np.ndarray, dim: int, dtype) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise InputError(f"expected embeddings of dimension {dim}, got shape {x.shape}")
    return x.astype(dtype, copy=False), single


def gate_logits_batch(x: np.ndarray, g: GatingParams) -> np.ndarray:
    h1 = relu(x @ g.w1.T + g.b1)
    h2 = relu(h1 @ g.w2.T + g.b2)
    return h2 @ g.w_out.T + g.b_out


def gate_forward(x: np.ndarray, g: GatingParams) -> np.ndarray:
    """Per-domain gate scores, each independently in (0, 1).

    Scores are raw sigmoids, not a distribution: they do not sum to one,
    and a query matching no domain scores low everywhere.
    """
    xb, single = _as_batch(x, g.w1.shape[1], g.w1.dtype)
    scores = sigmoid(gate_logits_batch(xb, g))
    return scores[0] if single else scores


def specializer_forward(x: np.ndarray, p: SpecializerParams) -> np.ndarray:
    """Bottleneck correction: w_up @ relu(w_down @ x + b_down) + b_up."""
    xb, single = _as_batch(x, p.w_down.shape[1], p.w_down.dtype)
    hidden = relu(xb @ p.w_down.T + p.b_down)
    out = hidden @ p.w_up.T + p.b_up
    return out[0] if single else out


def normalize_gates(scores: np.ndarray, how: str = "none") -> np.ndarray:
    """Optional sum-to-one rescaling of gate scores.

    Default is none: raw sigmoid scores keep the out-of-domain behavior
    (all gates small => output near the input), which normalization would
    destroy.
    """
    if how == "none":
        return scores
    if how == "sum":
        total = scores.sum(axis=-1, keepdims=True)
        return scores / total
    raise InputError(f"unknown gate normalization {how!r}; expected one of {GATE_NORMALIZATIONS}")


def pool_weighted(scores: np.ndarray, outputs: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Weighted sum of the specializer outputs, weights = gate scores."""
    outputs = np.asarray(outputs)
    if scores.shape[-1] != outputs.shape[0]:
        raise InputError(
            f"got {scores.shape[-1]} scores for {outputs.shape[0]} specializer outputs")
    return np.tensordot(scores, outputs, axes=([-1], [0]))


def pool_top1(scores: np.ndarray, outputs: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Output of the single highest-scoring specializer; ties break to the
    lowest domain index."""
    outputs = np.asarray(outputs)
    if scores.shape[-1] != outputs.shape[0]:
        raise InputError(
            f"got {scores.shape[-1]} scores for {outputs.shape[0]} specializer outputs")
    return outputs[int(np.argmax(scores))]


def transform_batch(x: np.ndarray, params: MoEParams, mode: str = "weighted",
                    gates: np.ndarray | None = None,
                    gate_normalization: str = "none") -> np.ndarray:
    """Skip connection around the pooled specializer corrections.

    ``gates`` overrides the learned gate when given (random-gating baseline,
    fixture injection); shape (B, M) or (M,) broadcast over the batch.
    """
    if mode not in POOL_MODES:
        raise InputError(f"unknown pool mode {mode!r}; expected one of {POOL_MODES}")
    xb, single = _as_batch(x, params.dim, params.dtype)
    b = xb.shape[0]
    if gates is None:
        scores = sigmoid(gate_logits_batch(xb, params.gating))
    else:
        scores = np.asarray(gates, dtype=params.dtype)
        if scores.ndim == 1:
            scores = np.broadcast_to(scores, (b, params.num_domains))
        if scores.shape != (b, params.num_domains):
            raise InputError(
                f"gates shape {scores.shape} does not match ({b}, {params.num_domains})")
    scores = normalize_gates(scores, gate_normalization)

    # (M, B, d) stack of per-domain corrections
    outs = np.stack([specializer_forward(xb, s) for s in params.specializers])
    if mode == "weighted":
        pooled = np.einsum("bm,mbd->bd", scores, outs)
    else:
        # ties break to the lowest index: argmax returns the first maximum
        best = np.argmax(scores, axis=1)
        pooled = outs[best, np.arange(b), :]
    result = xb + pooled
    return result[0] if single else result


def moe_transform(x: np.ndarray, params: MoEParams, mode: str = "weighted",
                  gate_normalization: str = "none") -> np.ndarray:
    """Transform one query embedding (or a batch) with the learned gate."""
    return transform_batch(x, params, mode=mode, gate_normalization=gate_normalization)


def random_gate(m: int, rng: Rng) -> np.ndarray:
    """Uniform gate scores in (0, 1); stands in for the learned gate to
    measure how much supervised gating itself contributes."""
    if m < 1:
        raise InputError(f"need at least one domain, got m={m}")
    return rng.uniform_open((m,))
