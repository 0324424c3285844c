"""End-to-end training of the mixture module on frozen embeddings.

The objective is the sum of the contrastive retrieval loss (computed on
transformed queries against their positive documents) and the gate's
binary cross-entropy, weighted by ``loss_weight``. Gradients for every
parameter are accumulated by a hand-written reverse pass over the full
forward graph: gating MLP, specializers, weighted pooling, skip
connection, similarity head. A finite-difference checker validates the
whole pass in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .linalg import relu, sigmoid
from .losses import SIMILARITIES, _contrastive_head, bce_from_logits
from .model import (GATE_NORMALIZATIONS, MoEParams, clone_params, init_params,
                    named_arrays, normalize_gates)
from .rng import Rng


@dataclass
class TrainingExample:
    query_id: str
    query_embedding: np.ndarray      # (d,)
    positive_doc_embedding: np.ndarray  # (d,)
    domain_labels: np.ndarray        # (M,) multi-hot; all-zero = unlabeled


@dataclass
class Batch:
    queries: np.ndarray  # (B, d)
    docs: np.ndarray     # (B, d)
    labels: np.ndarray   # (B, M)

    @classmethod
    def from_examples(cls, examples: list[TrainingExample]) -> "Batch":
        if not examples:
            raise InputError("empty batch")
        return cls(
            queries=np.stack([e.query_embedding for e in examples]),
            docs=np.stack([e.positive_doc_embedding for e in examples]),
            labels=np.stack([np.asarray(e.domain_labels, dtype=np.float64)
                             for e in examples]),
        )

    @property
    def size(self) -> int:
        return self.queries.shape[0]


@dataclass
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-5
    epochs: int = 60
    validation_fraction: float = 0.05
    temperature: float = 1.0
    loss_weight: float = 1.0
    seed: int = 0
    similarity: str = "dot"
    gate_normalization: str = "none"
    dtype: str = "float32"  # float64 for gradient checking

    def validate(self) -> "TrainConfig":
        if self.batch_size < 2:
            raise InputError("batch_size must be >= 2 (in-batch negatives)")
        if not 0 < self.validation_fraction < 1:
            raise InputError("validation_fraction must lie in (0, 1)")
        if self.temperature <= 0:
            raise InputError("temperature must be positive")
        if self.loss_weight < 0:
            raise InputError("loss_weight must be non-negative")
        if self.epochs < 0:
            raise InputError("epochs must be non-negative")
        if self.similarity not in SIMILARITIES:
            raise InputError(f"unknown similarity {self.similarity!r}")
        if self.gate_normalization not in GATE_NORMALIZATIONS:
            raise InputError(f"unknown gate normalization {self.gate_normalization!r}")
        if self.dtype not in ("float32", "float64"):
            raise InputError(f"dtype must be float32 or float64, got {self.dtype!r}")
        return self

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class LossParts:
    total: float
    contrastive: float
    bce: float


def _forward(batch: Batch, params: MoEParams, config: TrainConfig):
    """Forward pass returning the loss parts and every intermediate the
    reverse pass needs."""
    dt = params.dtype
    x = batch.queries.astype(dt, copy=False)
    g = params.gating

    h1 = relu(x @ g.w1.T + g.b1)
    h2 = relu(h1 @ g.w2.T + g.b2)
    zg = h2 @ g.w_out.T + g.b_out
    gates = sigmoid(zg)
    gates_n = normalize_gates(gates, config.gate_normalization)

    hidden = [relu(x @ s.w_down.T + s.b_down) for s in params.specializers]
    outs = np.stack([a @ s.w_up.T + s.b_up
                     for a, s in zip(hidden, params.specializers)])  # (M, B, d)
    pooled = np.einsum("bm,mbd->bd", gates_n, outs)
    q = x + pooled

    con_loss, dq = _contrastive_head(q.astype(np.float64), batch.docs.astype(np.float64),
                                     config.temperature, config.similarity)
    bce, dzg_bce = bce_from_logits(zg.astype(np.float64), batch.labels)
    parts = LossParts(total=con_loss + config.loss_weight * bce,
                      contrastive=con_loss, bce=bce)
    cache = dict(x=x, h1=h1, h2=h2, zg=zg, gates=gates, gates_n=gates_n,
                 hidden=hidden, outs=outs, dq=dq, dzg_bce=dzg_bce)
    return parts, cache


def total_loss(batch: Batch, params: MoEParams,
               config: TrainConfig) -> tuple[float, dict[str, np.ndarray], LossParts]:
    """Combined loss and the gradient of every parameter array.

    Gradients are float64 and keyed by the names of model.named_arrays().
    """
    config.validate()
    parts, c = _forward(batch, params, config)
    g = params.gating
    x64 = c["x"].astype(np.float64)
    dq = c["dq"]  # dL/d(transformed query), float64

    grads: dict[str, np.ndarray] = {}

    # pooling: dL/d(gates_n)[b,m] = dq[b,:] . outs[m,b,:]
    dgates_n = np.einsum("bd,mbd->bm", dq, c["outs"].astype(np.float64))
    gates64 = c["gates"].astype(np.float64)
    if config.gate_normalization == "sum":
        total = gates64.sum(axis=1, keepdims=True)
        gn = gates64 / total
        dgates = (dgates_n - (dgates_n * gn).sum(axis=1, keepdims=True)) / total
    else:
        dgates = dgates_n
    dzg = dgates * gates64 * (1.0 - gates64)
    dzg += config.loss_weight * c["dzg_bce"]

    h1_64 = c["h1"].astype(np.float64)
    h2_64 = c["h2"].astype(np.float64)
    grads["gating.w_out"] = dzg.T @ h2_64
    grads["gating.b_out"] = dzg.sum(axis=0)
    dh2 = (dzg @ g.w_out.astype(np.float64)) * (h2_64 > 0)
    grads["gating.w2"] = dh2.T @ h1_64
    grads["gating.b2"] = dh2.sum(axis=0)
    dh1 = (dh2 @ g.w2.astype(np.float64)) * (h1_64 > 0)
    grads["gating.w1"] = dh1.T @ x64
    grads["gating.b1"] = dh1.sum(axis=0)

    gn_used = c["gates_n"].astype(np.float64)
    for i, s in enumerate(params.specializers):
        dout = gn_used[:, i:i + 1] * dq  # (B, d)
        a64 = c["hidden"][i].astype(np.float64)
        grads[f"specializers.{i}.w_up"] = dout.T @ a64
        grads[f"specializers.{i}.b_up"] = dout.sum(axis=0)
        da = (dout @ s.w_up.astype(np.float64)) * (a64 > 0)
        grads[f"specializers.{i}.w_down"] = da.T @ x64
        grads[f"specializers.{i}.b_down"] = da.sum(axis=0)

    return parts.total, grads, parts


def loss_only(batch: Batch, params: MoEParams, config: TrainConfig) -> LossParts:
    parts, _ = _forward(batch, params, config)
    return parts


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MoEParams) -> "AdamState":
        return cls(m={n: np.zeros_like(a, dtype=np.float64) for n, a in named_arrays(params)},
                   v={n: np.zeros_like(a, dtype=np.float64) for n, a in named_arrays(params)})


def adam_step(params: MoEParams, grads: dict[str, np.ndarray], state: AdamState,
              learning_rate: float) -> None:
    """One bias-corrected Adam update, applied to the parameters in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, arr in named_arrays(params):
        if name not in grads:
            raise InputError(f"missing gradient for {name}")
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != arr.shape:
            raise InputError(f"gradient shape {grad.shape} does not match "
                             f"{name} shape {arr.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * grad
        v *= b2
        v += (1 - b2) * grad * grad
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        arr -= (learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)).astype(arr.dtype)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def nudge_off_relu_kinks(params: MoEParams, batch: Batch,
                         threshold: float = 2e-3, max_rounds: int = 200) -> None:
    """Shift biases until no ReLU preactivation lies within ``threshold``
    of zero for this batch.

    Central differences are only a valid gradient oracle when no kink sits
    inside the perturbation window; random instances routinely place a few
    preactivations there, which would indict the checker, not the
    gradients. Mutates the parameters in place.
    """
    x = batch.queries.astype(params.dtype, copy=False)
    g = params.gating
    for _ in range(max_rounds):
        pre1 = x @ g.w1.T + g.b1
        bad = np.abs(pre1) < threshold
        if bad.any():
            g.b1[np.unique(np.nonzero(bad)[1])] += 3 * threshold
            continue
        pre2 = relu(pre1) @ g.w2.T + g.b2
        bad = np.abs(pre2) < threshold
        if bad.any():
            g.b2[np.unique(np.nonzero(bad)[1])] += 3 * threshold
            continue
        moved = False
        for s in params.specializers:
            pre = x @ s.w_down.T + s.b_down
            bad = np.abs(pre) < threshold
            if bad.any():
                s.b_down[np.unique(np.nonzero(bad)[1])] += 3 * threshold
                moved = True
        if not moved:
            return
    raise NumericalError("could not move all ReLU preactivations away from "
                         "zero; instance unsuitable for finite differences")


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_param: str
    tolerance: float
    per_param: dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: max relative error {self.max_rel_error:.3e} "
                f"at {self.worst_param} (tolerance {self.tolerance:.1e})")


def grad_check(params: MoEParams, batch: Batch, config: TrainConfig,
               h: float = 1e-4, tol: float = 1e-4, abs_floor: float = 1e-6,
               corrupt_param: str | None = None,
               corrupt_factor: float = 1.01) -> GradCheckReport:
    """Compare every analytic parameter gradient against central finite
    differences (L(p+h) - L(p-h)) / 2h.

    Requires float64 parameters; float32 has too little headroom under the
    default step. ``corrupt_param`` multiplies one analytic gradient array
    by ``corrupt_factor`` before comparison, for fault-injection tests of
    the checker itself.
    """
    if params.dtype != np.float64:
        raise InputError("grad_check requires float64 parameters")
    _, grads, _ = total_loss(batch, params, config)
    if corrupt_param is not None:
        if corrupt_param not in grads:
            raise InputError(f"unknown parameter {corrupt_param!r}")
        grads[corrupt_param] = grads[corrupt_param] * corrupt_factor

    per_param: dict[str, float] = {}
    worst = ("", 0.0)
    for name, arr in named_arrays(params):
        analytic = grads[name]
        worst_here = 0.0
        flat = arr.reshape(-1)
        aflat = analytic.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = loss_only(batch, params, config).total
            flat[idx] = orig - h
            down = loss_only(batch, params, config).total
            flat[idx] = orig
            fd = (up - down) / (2 * h)
            err = abs(aflat[idx] - fd) / max(abs(aflat[idx]), abs(fd), abs_floor)
            if err > worst_here:
                worst_here = err
        per_param[name] = worst_here
        if worst_here > worst[1]:
            worst = (name, worst_here)
    return GradCheckReport(passed=worst[1] <= tol, max_rel_error=worst[1],
                           worst_param=worst[0] or "(none)", tolerance=tol,
                           per_param=per_param)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class EpochLog:
    """Per-epoch record; totals fold in the loss weight, the component
    columns are unweighted."""
    epoch: int
    train_total: float
    train_contrastive: float
    train_bce: float
    val_total: float
    val_contrastive: float
    val_bce: float

    FIELDS = ("epoch", "train_total", "train_contrastive", "train_bce",
              "val_total", "val_contrastive", "val_bce")

    def as_tsv(self) -> str:
        return "\t".join([str(self.epoch)] + [f"{getattr(self, f):.10g}"
                                              for f in self.FIELDS[1:]])


def best_epoch(val_losses: list[float]) -> int:
    """Index of the checkpoint to keep: lowest validation loss, first on
    ties."""
    if not val_losses:
        raise InputError("no epochs recorded")
    return min(range(len(val_losses)), key=lambda i: val_losses[i])


def _batches(indices: list[int], batch_size: int) -> list[list[int]]:
    """Consecutive chunks; a trailing single-element chunk is folded into
    the previous one so every batch keeps at least one in-batch negative."""
    chunks = [indices[i:i + batch_size] for i in range(0, len(indices), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2].extend(chunks.pop())
    return chunks


def train(examples: list[TrainingExample], config: TrainConfig,
          params: MoEParams | None = None) -> tuple[MoEParams, list[EpochLog]]:
    """Train on query/positive-document pairs and return the snapshot with
    the lowest validation loss plus the per-epoch log.

    A deterministic shuffle splits off ``validation_fraction`` of the
    examples for validation. Validation loss is evaluated on the whole
    held-out set as a single batch; a singleton validation set contributes
    only its cross-entropy term.
    """
    config.validate()
    n = len(examples)
    if n < 2:
        raise InputError(f"need at least 2 examples, got {n}")
    dims = {e.query_embedding.shape[0] for e in examples}
    dims |= {e.positive_doc_embedding.shape[0] for e in examples}
    if len(dims) != 1:
        raise InputError(f"inconsistent embedding dimensions: {sorted(dims)}")
    label_lens = {np.asarray(e.domain_labels).shape[0] for e in examples}
    if len(label_lens) != 1:
        raise InputError(f"inconsistent label lengths: {sorted(label_lens)}")
    d = dims.pop()
    m = label_lens.pop()

    root = Rng(config.seed)
    if params is None:
        params = init_params(d, m, root.spawn(0), dtype=config.np_dtype)
    elif params.dim != d or params.num_domains != m:
        raise InputError(
            f"model ({params.dim}, {params.num_domains}) does not match data ({d}, {m})")

    n_val = max(1, int(config.validation_fraction * n))
    n_train = n - n_val
    if n_train < 2:
        raise InputError(
            f"{n} examples leave only {n_train} for training after the "
            f"validation split; need at least 2")
    order = root.spawn(1).permutation(n)
    val_examples = [examples[i] for i in order[:n_val]]
    train_examples = [examples[i] for i in order[n_val:]]
    val_batch = Batch.from_examples(val_examples)

    if config.epochs == 0:
        return params, []

    logs: list[EpochLog] = []
    adam = AdamState.for_params(params)
    best = (float("inf"), clone_params(params))
    for epoch in range(1, config.epochs + 1):
        perm = root.spawn(1000 + epoch).permutation(n_train)
        sums = np.zeros(3)
        for chunk in _batches(perm, config.batch_size):
            batch = Batch.from_examples([train_examples[i] for i in chunk])
            _, grads, parts = total_loss(batch, params, config)
            adam_step(params, grads, adam, config.learning_rate)
            sums += np.array([parts.total, parts.contrastive, parts.bce]) * len(chunk)
        train_parts = sums / n_train

        val = loss_only(val_batch, params, config)
        logs.append(EpochLog(epoch=epoch,
                             train_total=train_parts[0],
                             train_contrastive=train_parts[1],
                             train_bce=train_parts[2],
                             val_total=val.total,
                             val_contrastive=val.contrastive,
                             val_bce=val.bce))
        if val.total < best[0]:
            best = (val.total, clone_params(params))
    return best[1], logs
