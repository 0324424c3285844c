import numpy as np
import pytest

from qmoe.errors import InputError
from qmoe.labeling import (CategoryGraph, CoverageStats, LabelingStats,
                           build_labels, default_top_categories_path,
                           label_query, load_category_graph,
                           load_doc_categories, load_label_file,
                           resolve_top_categories, write_label_file)
from qmoe.rng import Rng

TOPS = ["Law", "Culture", "Society", "Religion", "Human behavior"]


@pytest.fixture
def wiki_like_graph():
    """Mirrors the two canonical cases: an article category that sits one
    hop under a single top-level category, and one whose ancestry fans out
    to four."""
    edges = {
        "Constitutional law": ["Law"],
        "Holiday customs": ["Human behavior", "Religion", "Festivals"],
        "Festivals": ["Culture", "Society"],
    }
    return CategoryGraph(edges=edges, top_categories=list(TOPS))


class TestResolveTopCategories:
    def test_top_level_category_resolves_to_itself(self, wiki_like_graph):
        assert resolve_top_categories("Law", wiki_like_graph) == {"Law"}

    def test_three_node_chain(self):
        graph = CategoryGraph(edges={"a": ["b"], "b": ["c"]}, top_categories=["c"])
        assert resolve_top_categories("a", graph) == {"c"}

    def test_cycle_terminates_with_empty_result(self):
        graph = CategoryGraph(edges={"a": ["b"], "b": ["a"]}, top_categories=["z"])
        assert resolve_top_categories("a", graph) == set()

    def test_self_loop_terminates(self):
        graph = CategoryGraph(edges={"a": ["a"]}, top_categories=["z"])
        assert resolve_top_categories("a", graph) == set()

    def test_unknown_category_warns_not_fails(self, wiki_like_graph):
        stats = LabelingStats()
        assert resolve_top_categories("Nonexistent", wiki_like_graph, stats) == set()
        assert stats.unknown_categories == 1

    def test_collects_all_reachable_tops(self, wiki_like_graph):
        got = resolve_top_categories("Holiday customs", wiki_like_graph)
        assert got == {"Human behavior", "Religion", "Culture", "Society"}

    def test_depth_cap_truncates_and_counts(self):
        edges = {f"n{i}": [f"n{i+1}"] for i in range(100)}
        graph = CategoryGraph(edges=edges, top_categories=["n100"])
        stats = LabelingStats()
        assert resolve_top_categories("n0", graph, stats, max_depth=10) == set()
        assert stats.truncated_traversals == 1
        assert resolve_top_categories("n0", graph, max_depth=100) == {"n100"}

    def test_termination_on_random_cyclic_graphs(self):
        # 1000 random graphs, arbitrary cycles and self-loops included
        for seed in range(1000):
            rng = Rng(seed)
            n = 2 + rng.integer(40)
            nodes = [f"c{i}" for i in range(n)]
            edges = {}
            for node in nodes:
                k = rng.integer(4)
                if k:
                    edges[node] = [nodes[rng.integer(n)] for _ in range(k)]
            graph = CategoryGraph(edges=edges,
                                  top_categories=[nodes[rng.integer(n)]])
            result = resolve_top_categories(nodes[rng.integer(n)], graph)
            assert result <= set(graph.top_categories)

    def test_termination_on_large_graph(self):
        rng = Rng(123)
        n = 10_000
        edges = {f"c{i}": [f"c{rng.integer(n)}", f"c{rng.integer(n)}"]
                 for i in range(n)}
        graph = CategoryGraph(edges=edges, top_categories=["c0", "c1", "c2"])
        result = resolve_top_categories("c42", graph, max_depth=10_000)
        assert result <= {"c0", "c1", "c2"}


class TestLabelQuery:
    def test_single_label_law(self, wiki_like_graph):
        vec = label_query("q", ["doc_amendment"],
                          {"doc_amendment": ["Constitutional law"]},
                          wiki_like_graph)
        assert vec.tolist() == [1, 0, 0, 0, 0]

    def test_multi_label_new_year(self, wiki_like_graph):
        # one document fanning out to Culture, Society, Religion, and
        # Human behavior
        vec = label_query("q", ["doc_newyear"],
                          {"doc_newyear": ["Holiday customs"]}, wiki_like_graph)
        assert vec.tolist() == [0, 1, 1, 1, 1]

    def test_union_across_documents(self, wiki_like_graph):
        doc_cats = {"d1": ["Constitutional law"], "d2": ["Festivals"]}
        vec = label_query("q", ["d1", "d2"], doc_cats, wiki_like_graph)
        assert vec.tolist() == [1, 1, 1, 0, 0]

    def test_missing_doc_warns_and_degrades(self, wiki_like_graph):
        stats = LabelingStats()
        vec = label_query("q", ["ghost"], {}, wiki_like_graph, stats)
        assert vec.tolist() == [0, 0, 0, 0, 0]
        assert stats.unknown_docs == 1

    def test_no_relevant_docs_rejected(self, wiki_like_graph):
        with pytest.raises(InputError):
            label_query("q", [], {}, wiki_like_graph)

    def test_monotone_in_documents(self, wiki_like_graph):
        # adding a relevant document never removes a label
        doc_cats = {"d1": ["Constitutional law"], "d2": ["Holiday customs"]}
        one = label_query("q", ["d1"], doc_cats, wiki_like_graph)
        both = label_query("q", ["d1", "d2"], doc_cats, wiki_like_graph)
        assert np.all(both >= one)

    def test_order_independence(self, wiki_like_graph):
        doc_cats = {"d1": ["Constitutional law"],
                    "d2": ["Festivals", "Holiday customs"]}
        a = label_query("q", ["d1", "d2"], doc_cats, wiki_like_graph)
        b = label_query("q", ["d2", "d1"], doc_cats, wiki_like_graph)
        doc_cats_rev = {"d1": ["Constitutional law"],
                        "d2": ["Holiday customs", "Festivals"]}
        c = label_query("q", ["d1", "d2"], doc_cats_rev, wiki_like_graph)
        assert np.array_equal(a, b) and np.array_equal(a, c)


class TestBuildLabels:
    def test_toy_fixture_full_coverage(self, wiki_like_graph):
        qrels = {"q1": {"d1"}, "q2": {"d2"}, "q3": {"d1", "d2"}}
        doc_cats = {"d1": ["Constitutional law"], "d2": ["Festivals"]}
        labels, coverage = build_labels(qrels, doc_cats, wiki_like_graph)
        assert coverage.labeled_fraction == 1.0
        # q1 -> 1 label, q2 -> 2 labels, q3 -> 3 labels
        assert coverage.mean_labels == pytest.approx(2.0)
        assert coverage.summary() == "labeled=100.0% avg_labels=2.00"

    def test_unlabeled_doc_yields_unlabeled_query(self, wiki_like_graph):
        qrels = {"q1": {"d1"}, "q2": {"dx"}}
        doc_cats = {"d1": ["Constitutional law"], "dx": []}
        labels, coverage = build_labels(qrels, doc_cats, wiki_like_graph)
        assert labels["q2"].sum() == 0
        assert coverage.labeled_fraction == pytest.approx(0.5)

    def test_empty_qrels_rejected(self, wiki_like_graph):
        with pytest.raises(InputError):
            build_labels({}, {}, wiki_like_graph)


class TestFiles:
    def test_label_file_round_trip(self, tmp_path, wiki_like_graph):
        qrels = {"q1": {"d1"}, "q2": {"d2"}}
        doc_cats = {"d1": ["Constitutional law"], "d2": ["Holiday customs"]}
        labels, coverage = build_labels(qrels, doc_cats, wiki_like_graph)
        path = tmp_path / "labels.tsv"
        write_label_file(path, labels, coverage)
        loaded = load_label_file(path)
        assert set(loaded) == {"q1", "q2"}
        for qid in labels:
            assert np.array_equal(loaded[qid], labels[qid])
        assert path.read_text().strip().endswith(coverage.summary())

    def test_graph_and_doc_files(self, tmp_path):
        (tmp_path / "graph.tsv").write_text(
            "# comment\na\tb\nb\tc\n", encoding="utf-8")
        (tmp_path / "top.txt").write_text("c\n\n# note\n", encoding="utf-8")
        graph = load_category_graph(tmp_path / "graph.tsv", tmp_path / "top.txt")
        assert graph.edges == {"a": ["b"], "b": ["c"]}
        assert graph.top_categories == ["c"]
        (tmp_path / "dc.tsv").write_text("d1\tx|y\nd2\t\n", encoding="utf-8")
        cats = load_doc_categories(tmp_path / "dc.tsv")
        assert cats == {"d1": ["x", "y"], "d2": []}

    def test_malformed_graph_line_rejected(self, tmp_path):
        (tmp_path / "graph.tsv").write_text("a b no tab\n", encoding="utf-8")
        (tmp_path / "top.txt").write_text("c\n", encoding="utf-8")
        with pytest.raises(InputError):
            load_category_graph(tmp_path / "graph.tsv", tmp_path / "top.txt")

    def test_duplicate_doc_id_rejected(self, tmp_path):
        (tmp_path / "dc.tsv").write_text("d1\tx\nd1\ty\n", encoding="utf-8")
        with pytest.raises(InputError):
            load_doc_categories(tmp_path / "dc.tsv")

    def test_duplicate_top_categories_rejected(self):
        with pytest.raises(InputError):
            CategoryGraph(edges={}, top_categories=["A", "A"])


def test_default_top_categories_file_has_37_unique_entries():
    path = default_top_categories_path()
    names = [line for line in path.read_text(encoding="utf-8").splitlines()
             if line.strip() and not line.startswith("#")]
    assert len(names) == 37
    assert len(set(names)) == 37
    # the categories exercised by the labeling fixtures all appear
    for name in ("Law", "Culture", "Society", "Religion", "Human behavior",
                 "Life", "Mathematics"):
        assert name in names


def test_coverage_stats_formatting():
    stats = CoverageStats(num_queries=1000, num_labeled=978, total_labels=1995)
    assert stats.summary() == "labeled=97.8% avg_labels=2.04"
