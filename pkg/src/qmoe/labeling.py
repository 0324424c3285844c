"""Multi-label domain annotation of queries from a category graph.

Queries are labeled through their relevant documents: each document lists
the categories its source article belongs to, each category is resolved
upward through the child->parent category graph until top-level categories
are reached, and the query receives the union of everything its relevant
documents resolve to. Real category data contains cycles, so traversal
keeps a visited set and a depth cap.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

DEFAULT_MAX_DEPTH = 50


@dataclass
class CategoryGraph:
    """Child -> parents edges plus the ordered list of top-level categories.

    The order of ``top_categories`` defines the domain indices used by the
    model; it must match the label vectors a model was trained with.
    """
    edges: dict[str, list[str]]
    top_categories: list[str]
    top_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        if len(set(self.top_categories)) != len(self.top_categories):
            raise InputError("top categories contain duplicates")
        self.top_index = {c: i for i, c in enumerate(self.top_categories)}

    @property
    def num_domains(self) -> int:
        return len(self.top_categories)


@dataclass
class LabelingStats:
    """Counters for the degraded-input paths; these warn, never fail."""
    unknown_categories: int = 0
    unknown_docs: int = 0
    truncated_traversals: int = 0


def resolve_top_categories(category: str, graph: CategoryGraph,
                           stats: LabelingStats | None = None,
                           max_depth: int = DEFAULT_MAX_DEPTH) -> set[str]:
    """All top-level categories reachable from ``category`` by walking
    parent edges breadth-first.

    Cycle-safe via a visited set; traversal is capped at ``max_depth`` hops
    (category hierarchies are shallow in practice and the cap bounds work
    on adversarial inputs). A category that is itself top-level resolves to
    itself. An unknown category resolves to the empty set and bumps the
    warning counter.
    """
    if category not in graph.edges and category not in graph.top_index:
        if stats is not None:
            stats.unknown_categories += 1
        return set()
    found: set[str] = set()
    visited = {category}
    frontier = deque([(category, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if node in graph.top_index:
            found.add(node)
        if depth >= max_depth:
            if stats is not None:
                stats.truncated_traversals += 1
            continue
        for parent in graph.edges.get(node, ()):
            if parent not in visited:
                visited.add(parent)
                frontier.append((parent, depth + 1))
    return found


def label_query(query_id: str, relevant_doc_ids: list[str],
                doc_categories: dict[str, list[str]], graph: CategoryGraph,
                stats: LabelingStats | None = None,
                max_depth: int = DEFAULT_MAX_DEPTH) -> np.ndarray:
    """Multi-hot domain vector: the union over all relevant documents of
    the union over each document's categories of their top-level
    resolutions.

    A document missing from the category map counts as having no
    categories (warning, not error); a query resolving nowhere gets the
    all-zero vector and is reported as unlabeled by the coverage stats.
    """
    if not relevant_doc_ids:
        raise InputError(f"query {query_id!r} has no relevant documents")
    bits = np.zeros(graph.num_domains, dtype=np.int8)
    for doc_id in relevant_doc_ids:
        cats = doc_categories.get(doc_id)
        if cats is None:
            if stats is not None:
                stats.unknown_docs += 1
            continue
        for cat in cats:
            for top in resolve_top_categories(cat, graph, stats, max_depth):
                bits[graph.top_index[top]] = 1
    return bits


@dataclass
class CoverageStats:
    num_queries: int
    num_labeled: int
    total_labels: int

    @property
    def labeled_fraction(self) -> float:
        return self.num_labeled / self.num_queries if self.num_queries else 0.0

    @property
    def mean_labels(self) -> float:
        return self.total_labels / self.num_labeled if self.num_labeled else 0.0

    def summary(self) -> str:
        return (f"labeled={100.0 * self.labeled_fraction:.1f}% "
                f"avg_labels={self.mean_labels:.2f}")


def build_labels(qrels: dict[str, set[str]], doc_categories: dict[str, list[str]],
                 graph: CategoryGraph, stats: LabelingStats | None = None,
                 max_depth: int = DEFAULT_MAX_DEPTH,
                 ) -> tuple[dict[str, np.ndarray], CoverageStats]:
    """Label every query that has at least one relevant document.

    Returns the query -> multi-hot mapping plus coverage statistics:
    the fraction of queries that received at least one label and the mean
    number of labels per labeled query.
    """
    if not qrels:
        raise InputError("empty qrels")
    labels: dict[str, np.ndarray] = {}
    num_labeled = 0
    total_labels = 0
    for query_id in sorted(qrels):
        rel = sorted(qrels[query_id])
        if not rel:
            continue
        vec = label_query(query_id, rel, doc_categories, graph, stats, max_depth)
        labels[query_id] = vec
        count = int(vec.sum())
        if count:
            num_labeled += 1
            total_labels += count
    if not labels:
        raise InputError("qrels contain no query with a relevant document")
    coverage = CoverageStats(num_queries=len(labels), num_labeled=num_labeled,
                             total_labels=total_labels)
    return labels, coverage


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_category_graph(edges_path: str | Path, top_path: str | Path) -> CategoryGraph:
    """Edges file: one "child<TAB>parent" per line. Top-categories file:
    one name per line, order defining the domain indices; blank lines and
    '#' comments are skipped in both."""
    edges: dict[str, list[str]] = {}
    for lineno, line in _data_lines(edges_path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise InputError(f"{edges_path}:{lineno}: expected 'child<TAB>parent'")
        edges.setdefault(parts[0], []).append(parts[1])
    top = [line for _, line in _data_lines(top_path)]
    if not top:
        raise InputError(f"{top_path}: no top-level categories")
    return CategoryGraph(edges=edges, top_categories=top)


def load_doc_categories(path: str | Path) -> dict[str, list[str]]:
    """One "doc_id<TAB>cat1|cat2|..." per line; empty category list allowed."""
    out: dict[str, list[str]] = {}
    for lineno, line in _data_lines(path):
        doc_id, sep, cats = line.partition("\t")
        if not sep or not doc_id:
            raise InputError(f"{path}:{lineno}: expected 'doc_id<TAB>cat|cat|...'")
        if doc_id in out:
            raise InputError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
        out[doc_id] = [c for c in cats.split("|") if c]
    return out


def write_label_file(path: str | Path, labels: dict[str, np.ndarray],
                     coverage: CoverageStats) -> None:
    """One "query_id<TAB>bitstring" per line plus a '#'-prefixed stats
    footer."""
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(labels):
            bits = "".join(str(int(b)) for b in labels[query_id])
            fh.write(f"{query_id}\t{bits}\n")
        fh.write(f"# {coverage.summary()}\n")


def load_label_file(path: str | Path) -> dict[str, np.ndarray]:
    labels: dict[str, np.ndarray] = {}
    length = None
    for lineno, line in _data_lines(path):
        query_id, sep, bits = line.partition("\t")
        if not sep or not set(bits) <= {"0", "1"} or not bits:
            raise InputError(f"{path}:{lineno}: expected 'query_id<TAB>bitstring'")
        if length is None:
            length = len(bits)
        elif len(bits) != length:
            raise InputError(f"{path}:{lineno}: bitstring length {len(bits)} != {length}")
        labels[query_id] = np.array([int(b) for b in bits], dtype=np.int8)
    if not labels:
        raise InputError(f"{path}: no labels")
    return labels


def default_top_categories_path() -> Path:
    """Bundled 37-entry reconstruction of Wikipedia's main topic
    classifications (the upstream list shifts over time; see the data file
    header)."""
    return Path(__file__).parent / "data" / "top_categories_default.txt"


def _data_lines(path: str | Path):
    """Yields (file line number, content) pairs, skipping blanks and
    '#' comments."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line
