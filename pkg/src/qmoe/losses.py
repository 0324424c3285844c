"""Training objectives and their gradients.

Two losses drive the model: an in-batch-negatives contrastive loss on
query-document similarity trains the specializers, and a multi-label
binary cross-entropy trains the gate. Both are computed in float64
regardless of the parameter precision; similarity margins on a trained
model can sit far below float32 resolution.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError, NumericalError

SIMILARITIES = ("dot", "cosine")


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) without overflow for large |z|."""
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def similarity_matrix(queries: np.ndarray, docs: np.ndarray, similarity: str) -> np.ndarray:
    if similarity == "dot":
        with np.errstate(over="ignore"):  # overflow surfaces as the finiteness check
            return queries @ docs.T
    if similarity == "cosine":
        qn = np.linalg.norm(queries, axis=1, keepdims=True)
        dn = np.linalg.norm(docs, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = (queries / qn) @ (docs / dn).T
        return sims
    raise InputError(f"unknown similarity {similarity!r}; expected one of {SIMILARITIES}")


def _contrastive_head(queries: np.ndarray, docs: np.ndarray, temperature: float,
                      similarity: str) -> tuple[float, np.ndarray]:
    """Loss and dL/dQ for already-validated float64 inputs.

    Row i's positive is docs[i]; every other row of docs serves as a
    negative. Handles B=1 gracefully (loss 0), which the public wrapper
    rejects but the validation-loss path permits.
    """
    b = queries.shape[0]
    sims = similarity_matrix(queries, docs, similarity)
    if not np.all(np.isfinite(sims)):
        raise NumericalError("non-finite similarity in contrastive loss")
    logits = sims / temperature
    row_max = logits.max(axis=1, keepdims=True)
    shifted = logits - row_max
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + row_max
    loss = float(np.mean(lse[:, 0] - np.diagonal(logits)))

    probs = np.exp(logits - lse)
    dlogits = (probs - np.eye(b)) / b
    dsims = dlogits / temperature
    if similarity == "dot":
        dq = dsims @ docs
    else:
        qn = np.linalg.norm(queries, axis=1, keepdims=True)
        qh = queries / qn
        dh = docs / np.linalg.norm(docs, axis=1, keepdims=True)
        dqh = dsims @ dh
        # project out the radial component: d/dq of q/|q|
        dq = (dqh - (dqh * qh).sum(axis=1, keepdims=True) * qh) / qn
    return loss, dq


def contrastive_loss(transformed_queries, positive_docs, temperature: float = 1.0,
                     similarity: str = "dot") -> tuple[float, np.ndarray]:
    """InfoNCE over a batch with in-batch negatives.

    L = -(1/B) sum_i log( exp(s(q_i, d_i)/t) / sum_j exp(s(q_i, d_j)/t) )

    Returns the scalar loss and dL/dq_i for every query, in float64.
    Equal similarities everywhere give exactly ln B.
    """
    queries = np.asarray(transformed_queries, dtype=np.float64)
    docs = np.asarray(positive_docs, dtype=np.float64)
    if queries.ndim != 2 or docs.shape != queries.shape:
        raise InputError(
            f"queries and docs must be matching (B, d) batches, got "
            f"{queries.shape} and {docs.shape}")
    if queries.shape[0] < 2:
        raise InputError("in-batch negatives need a batch of at least 2")
    if temperature <= 0:
        raise InputError(f"temperature must be positive, got {temperature}")
    return _contrastive_head(queries, docs, temperature, similarity)


def bce_loss(gate_scores, labels) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over domains for one query.

    L = -(1/M) sum_i [ y_i ln p_i + (1 - y_i) ln(1 - p_i) ]

    Returns the loss and its gradient with respect to the pre-sigmoid
    logits, (p - y)/M. Scores saturated to exactly 0 or 1 are a numerical
    error here; inside training the loss is always evaluated from logits
    (see bce_from_logits), which cannot saturate.
    """
    p = np.asarray(gate_scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise InputError(f"scores and labels must be matching vectors, got "
                         f"{p.shape} and {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0/1")
    if np.any(p <= 0) or np.any(p >= 1):
        raise NumericalError("gate scores must lie strictly inside (0, 1)")
    m = p.shape[0]
    loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))
    return loss, (p - y) / m


def bce_from_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Batched BCE evaluated in logit space: softplus(z) - y*z per entry.

    Means over domains then over the batch; gradient is
    (sigmoid(z) - y) / (M * B). Never saturates.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape or z.ndim != 2:
        raise InputError(f"logits and labels must be matching (B, M) batches, got "
                         f"{z.shape} and {y.shape}")
    b, m = z.shape
    loss = float(np.mean(softplus(z) - y * z))
    with np.errstate(over="ignore"):
        p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)),
                     np.exp(np.minimum(z, 0.0)) / (1.0 + np.exp(np.minimum(z, 0.0))))
    return loss, (p - y) / (m * b)
