"""Brute-force dense retrieval and ranked-retrieval quality metrics.

Retrieval is exact: every document is scored against the query and the
top k kept. Runs are canonical (scores non-increasing, ties broken by
ascending doc id) so evaluation is deterministic. Queries without any
relevant document are excluded from metric means, matching the usual
trec_eval convention; scores are computed in float64 so rankings do not
depend on summation quirks of the stored float32 payload.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .embio import EmbeddingStore
from .losses import SIMILARITIES

METRICS = ("map@100", "mrr@100", "recall@100", "ndcg@10", "ndcg@3", "p@1")


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------

def retrieve(query_vec: np.ndarray, store: EmbeddingStore, k: int,
             similarity: str = "dot") -> list[tuple[str, float]]:
    """Exact top-k of the store by similarity; returns min(k, N) pairs."""
    if len(store) == 0:
        raise InputError("cannot retrieve from an empty store")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != store.dim:
        raise InputError(f"query has shape {q.shape}, store dimension is {store.dim}")
    docs = store.matrix.astype(np.float64, copy=False)
    if similarity == "dot":
        scores = docs @ q
    elif similarity == "cosine":
        qn = np.linalg.norm(q)
        dn = np.linalg.norm(docs, axis=1)
        if qn == 0 or np.any(dn == 0):
            raise InputError("cosine similarity undefined for zero vectors")
        scores = (docs @ q) / (dn * qn)
    else:
        raise InputError(f"unknown similarity {similarity!r}; expected one of {SIMILARITIES}")
    order = np.lexsort((np.asarray(store.ids), -scores))[:k]
    return [(store.ids[i], float(scores[i])) for i in order]


def retrieve_all(queries: EmbeddingStore, docs: EmbeddingStore, k: int,
                 similarity: str = "dot") -> dict[str, list[tuple[str, float]]]:
    """Top-k lists for every query in the store, keyed by query id."""
    return {qid: retrieve(queries.matrix[i], docs, k, similarity)
            for i, qid in enumerate(queries.ids)}


# ---------------------------------------------------------------------------
# Run and qrels files (TREC conventions)
# ---------------------------------------------------------------------------

def canonicalize_run(run: dict[str, list[tuple[str, float]]]
                     ) -> dict[str, list[tuple[str, float]]]:
    """Sort each per-query list by descending score, ascending doc id;
    reject duplicate docs within a query."""
    out = {}
    for qid, pairs in run.items():
        seen = {d for d, _ in pairs}
        if len(seen) != len(pairs):
            raise InputError(f"query {qid!r}: duplicate doc ids in run")
        out[qid] = sorted(pairs, key=lambda p: (-p[1], p[0]))
    return out


def write_run(path: str | Path, run: dict[str, list[tuple[str, float]]],
              tag: str = "qmoe") -> None:
    run = canonicalize_run(run)
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, (doc_id, score) in enumerate(run[qid], 1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def read_run(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    run: dict[str, list[tuple[str, float]]] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise InputError(f"{path}:{lineno}: expected 6 whitespace-separated "
                             f"run fields, got {len(parts)}")
        qid, _, doc_id, _, score, _ = parts
        try:
            run.setdefault(qid, []).append((doc_id, float(score)))
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad score {score!r}") from None
    if not run:
        raise InputError(f"{path}: empty run")
    return canonicalize_run(run)


def read_qrels(path: str | Path) -> dict[str, set[str]]:
    """TREC qrels: "query_id 0 doc_id rel", binary relevance (rel > 0)."""
    qrels: dict[str, set[str]] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InputError(f"{path}:{lineno}: expected 4 whitespace-separated "
                             f"qrels fields, got {len(parts)}")
        qid, _, doc_id, rel = parts
        try:
            relevant = int(rel) > 0
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad relevance {rel!r}") from None
        qrels.setdefault(qid, set())
        if relevant:
            qrels[qid].add(doc_id)
    if not qrels:
        raise InputError(f"{path}: empty qrels")
    return qrels


def write_qrels(path: str | Path, qrels: dict[str, set[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            for doc_id in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {doc_id} 1\n")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _evaluated_queries(run: dict[str, list[tuple[str, float]]],
                       qrels: dict[str, set[str]]) -> list[str]:
    missing = sorted(set(run) - set(qrels))
    if missing:
        raise InputError(f"run queries missing from qrels: {missing[:5]}"
                         f"{'...' if len(missing) > 5 else ''}")
    return sorted(q for q in run if qrels[q])


def _ranked_docs(pairs: list[tuple[str, float]], k: int) -> list[str]:
    return [doc_id for doc_id, _ in pairs[:k]]


def ndcg_at_k(run, qrels, k: int) -> tuple[dict[str, float], float]:
    """Binary-gain NDCG: discount 1/log2(rank+1), ideal = best possible
    placement of min(|relevant|, k) documents."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    per_query = {}
    for qid in _evaluated_queries(run, qrels):
        rel = qrels[qid]
        dcg = sum(1.0 / math.log2(i + 1)
                  for i, doc in enumerate(_ranked_docs(run[qid], k), 1) if doc in rel)
        ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(len(rel), k) + 1))
        per_query[qid] = dcg / ideal
    return per_query, _mean(per_query)


def map_at_k(run, qrels, k: int) -> tuple[dict[str, float], float]:
    """AP@k = sum of precision at each relevant retrieved rank <= k,
    divided by the total number of relevant documents."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    per_query = {}
    for qid in _evaluated_queries(run, qrels):
        rel = qrels[qid]
        hits = 0
        ap = 0.0
        for i, doc in enumerate(_ranked_docs(run[qid], k), 1):
            if doc in rel:
                hits += 1
                ap += hits / i
        per_query[qid] = ap / len(rel)
    return per_query, _mean(per_query)


def mrr_at_k(run, qrels, k: int) -> tuple[dict[str, float], float]:
    """Reciprocal rank of the first relevant document within the top k."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    per_query = {}
    for qid in _evaluated_queries(run, qrels):
        rel = qrels[qid]
        per_query[qid] = 0.0
        for i, doc in enumerate(_ranked_docs(run[qid], k), 1):
            if doc in rel:
                per_query[qid] = 1.0 / i
                break
    return per_query, _mean(per_query)


def recall_at_k(run, qrels, k: int) -> tuple[dict[str, float], float]:
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    per_query = {}
    for qid in _evaluated_queries(run, qrels):
        rel = qrels[qid]
        per_query[qid] = len(rel.intersection(_ranked_docs(run[qid], k))) / len(rel)
    return per_query, _mean(per_query)


def p_at_1(run, qrels) -> tuple[dict[str, float], float]:
    per_query = {}
    for qid in _evaluated_queries(run, qrels):
        docs = _ranked_docs(run[qid], 1)
        per_query[qid] = 1.0 if docs and docs[0] in qrels[qid] else 0.0
    return per_query, _mean(per_query)


def _mean(per_query: dict[str, float]) -> float:
    if not per_query:
        raise InputError("no queries with relevant documents to evaluate")
    return sum(per_query.values()) / len(per_query)


def evaluate_run(run, qrels) -> dict[str, tuple[dict[str, float], float]]:
    """All six standard metrics, keyed by the canonical metric names."""
    return {
        "map@100": map_at_k(run, qrels, 100),
        "mrr@100": mrr_at_k(run, qrels, 100),
        "recall@100": recall_at_k(run, qrels, 100),
        "ndcg@10": ndcg_at_k(run, qrels, 10),
        "ndcg@3": ndcg_at_k(run, qrels, 3),
        "p@1": p_at_1(run, qrels),
    }


def metric_cutoff(name: str) -> int:
    return int(name.split("@")[1])


def format_metric_table(results: dict[str, tuple[dict[str, float], float]]) -> str:
    width = max(len(m) for m in METRICS)
    lines = [f"{'metric'.ljust(width)}  mean", f"{'-' * width}  ------"]
    for name in METRICS:
        _, mean = results[name]
        lines.append(f"{name.ljust(width)}  {mean:.4f}")
    return "\n".join(lines)


def write_metric_report(out_dir: str | Path,
                        results: dict[str, tuple[dict[str, float], float]]) -> Path:
    """Machine-readable report: metrics.tsv rows of
    (metric, cutoff, mean, per-query file), one per-query file per metric."""
    out_dir = Path(out_dir)
    per_query_dir = out_dir / "per_query"
    per_query_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "metrics.tsv"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("metric\tcutoff\tmean\tper_query_file\n")
        for name in METRICS:
            per_query, mean = results[name]
            pq_path = per_query_dir / (name.replace("@", "_at_") + ".tsv")
            with open(pq_path, "w", encoding="utf-8") as pq:
                for qid in sorted(per_query):
                    pq.write(f"{qid}\t{per_query[qid]:.10g}\n")
            rel = pq_path.relative_to(out_dir)
            fh.write(f"{name}\t{metric_cutoff(name)}\t{mean:.10g}\t{rel}\n")
    return report_path
