"""Command-line pipelines over the library.

Subcommands: label, train, transform, retrieve, evaluate, compare,
gradcheck, synth. Every command is a pure function of its inputs, options,
and seed: rerunning with the same arguments produces byte-identical
outputs, and no command mutates an input file. Options resolve as CLI flag
over --config file entry over built-in default; the effective set is
echoed to the log. Exit codes: 0 success, 1 usage or input error, 2
numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import figures
from .checkpoint import CheckpointMeta, load_checkpoint, save_checkpoint
from .config import echo_options, read_config_file, resolve_options
from .embio import EmbeddingStore, read_embeddings, write_embeddings
from .errors import InputError, NumericalError
from .evaluation import (METRICS, evaluate_run, format_metric_table,
                         metric_cutoff, read_qrels, read_run, retrieve_all,
                         write_metric_report, write_run)
from .labeling import (DEFAULT_MAX_DEPTH, LabelingStats, build_labels,
                       default_top_categories_path, load_category_graph,
                       load_doc_categories, load_label_file, write_label_file)
from .model import init_params, named_arrays, transform_batch
from .rng import Rng
from .stats import paired_ttest_bonferroni
from .synth import (DEFAULT_NOISE, DOC_SPREAD, OFFSET_SCALE, SCALE,
                    synth_benchmark, write_benchmark)
from .training import (Batch, TrainConfig, TrainingExample, grad_check,
                       nudge_off_relu_kinks, train)

log = logging.getLogger("qmoe")


class _Parser(argparse.ArgumentParser):
    """Usage errors must exit 1, not argparse's default 2 (2 is reserved
    for numerical failures)."""

    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------------------
# Shared option plumbing
# ---------------------------------------------------------------------------

def _require(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise InputError(f"missing required option(s): {flags}")


def _input_path(opts: dict, key: str) -> Path:
    path = Path(opts[key])
    if not path.exists():
        raise InputError(f"--{key.replace('_', '-')}: {path} does not exist")
    return path


def _output_path(opts: dict, key: str) -> Path:
    path = Path(opts[key])
    parent = path.parent if path.parent != Path("") else Path(".")
    if not parent.is_dir():
        raise InputError(f"--{key.replace('_', '-')}: directory {parent} does not exist")
    return path


def _output_dir(opts: dict, key: str) -> Path:
    path = Path(opts[key])
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# label
# ---------------------------------------------------------------------------

LABEL_DEFAULTS = dict(graph=None, top_categories=str(default_top_categories_path()),
                      doc_categories=None, qrels=None, output=None,
                      max_depth=DEFAULT_MAX_DEPTH)


def cmd_label(opts: dict) -> int:
    _require(opts, "graph", "doc_categories", "qrels", "output")
    graph = load_category_graph(_input_path(opts, "graph"),
                                _input_path(opts, "top_categories"))
    doc_cats = load_doc_categories(_input_path(opts, "doc_categories"))
    qrels = read_qrels(_input_path(opts, "qrels"))
    out = _output_path(opts, "output")

    stats = LabelingStats()
    labels, coverage = build_labels(qrels, doc_cats, graph, stats,
                                    max_depth=opts["max_depth"])
    write_label_file(out, labels, coverage)
    if stats.unknown_docs or stats.unknown_categories or stats.truncated_traversals:
        log.warning("labeling degradations: %d unknown docs, %d unknown "
                    "categories, %d truncated traversals", stats.unknown_docs,
                    stats.unknown_categories, stats.truncated_traversals)
    print(coverage.summary())
    log.info("wrote %d labels to %s", len(labels), out)
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

TRAIN_DEFAULTS = dict(queries=None, docs=None, qrels=None, labels=None,
                      checkpoint=None, log_file=None,
                      batch_size=512, learning_rate=1e-5, epochs=60,
                      validation_fraction=0.05, temperature=1.0,
                      loss_weight=1.0, seed=0, similarity="dot",
                      gate_normalization="none", dtype="float32")


def _assemble_examples(queries: EmbeddingStore, docs: EmbeddingStore,
                       qrels: dict[str, set[str]],
                       labels: dict[str, np.ndarray]) -> list[TrainingExample]:
    """One example per query: its embedding, the lowest-id relevant
    document present in the store, and its label vector (all-zero when the
    query has no label entry; such queries still train the skip path)."""
    num_domains = len(next(iter(labels.values())))
    doc_index = docs.index_map()
    examples = []
    skipped = 0
    for i, qid in enumerate(queries.ids):
        candidates = sorted(d for d in qrels.get(qid, ()) if d in doc_index)
        if not candidates:
            skipped += 1
            continue
        examples.append(TrainingExample(
            query_id=qid,
            query_embedding=queries.matrix[i],
            positive_doc_embedding=docs.matrix[doc_index[candidates[0]]],
            domain_labels=labels.get(qid, np.zeros(num_domains, dtype=np.int8)),
        ))
    if skipped:
        log.warning("skipped %d queries without a relevant document in the store",
                    skipped)
    if not examples:
        raise InputError("no trainable queries: none has a relevant document "
                         "in the document store")
    return examples


def cmd_train(opts: dict) -> int:
    _require(opts, "queries", "docs", "qrels", "labels", "checkpoint", "log_file")
    queries = read_embeddings(_input_path(opts, "queries"))
    docs = read_embeddings(_input_path(opts, "docs"))
    qrels = read_qrels(_input_path(opts, "qrels"))
    labels = load_label_file(_input_path(opts, "labels"))
    ckpt_path = _output_path(opts, "checkpoint")
    log_path = _output_path(opts, "log_file")

    config = TrainConfig(
        batch_size=opts["batch_size"], learning_rate=opts["learning_rate"],
        epochs=opts["epochs"], validation_fraction=opts["validation_fraction"],
        temperature=opts["temperature"], loss_weight=opts["loss_weight"],
        seed=opts["seed"], similarity=opts["similarity"],
        gate_normalization=opts["gate_normalization"], dtype=opts["dtype"],
    ).validate()
    examples = _assemble_examples(queries, docs, qrels, labels)
    params, logs = train(examples, config)

    save_checkpoint(ckpt_path, params,
                    CheckpointMeta(pool_mode="weighted",
                                   gate_normalization=config.gate_normalization))
    with open(log_path, "w", encoding="utf-8") as fh:
        for entry in logs:
            fh.write(entry.as_tsv() + "\n")
    if logs:
        figures.training_curves(logs, Path(str(log_path) + ".png"))
        best = min(logs, key=lambda e: e.val_total)
        print(f"trained {len(examples)} examples for {len(logs)} epochs; "
              f"kept epoch {best.epoch} (validation loss {best.val_total:.6f})")
    else:
        print(f"epochs=0: wrote freshly initialized parameters for "
              f"{len(examples)} examples")
    log.info("checkpoint %s, log %s", ckpt_path, log_path)
    return 0


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

TRANSFORM_DEFAULTS = dict(checkpoint=None, input=None, output=None,
                          mode="weighted", seed=0, gate_normalization=None)


def cmd_transform(opts: dict) -> int:
    _require(opts, "checkpoint", "input", "output")
    params, meta = load_checkpoint(_input_path(opts, "checkpoint"))
    store = read_embeddings(_input_path(opts, "input"))
    out = _output_path(opts, "output")
    gate_norm = opts["gate_normalization"] or meta.gate_normalization

    mode = opts["mode"]
    if mode == "rnd-g":
        rng = Rng(opts["seed"])
        gates = rng.uniform_open((len(store), params.num_domains))
        transformed = transform_batch(store.matrix, params, mode="weighted",
                                      gates=gates, gate_normalization=gate_norm)
    elif mode in ("weighted", "top1"):
        transformed = transform_batch(store.matrix, params, mode=mode,
                                      gate_normalization=gate_norm)
    else:
        raise InputError(f"unknown mode {mode!r}; expected weighted, top1, or rnd-g")
    write_embeddings(out, EmbeddingStore(ids=list(store.ids), matrix=transformed))
    print(f"transformed {len(store)} embeddings ({mode}) -> {out}")
    return 0


# ---------------------------------------------------------------------------
# retrieve
# ---------------------------------------------------------------------------

RETRIEVE_DEFAULTS = dict(queries=None, docs=None, output=None, k=100,
                         similarity="dot", tag="qmoe")


def cmd_retrieve(opts: dict) -> int:
    _require(opts, "queries", "docs", "output")
    queries = read_embeddings(_input_path(opts, "queries"))
    docs = read_embeddings(_input_path(opts, "docs"))
    out = _output_path(opts, "output")
    if opts["k"] < 1:
        raise InputError(f"--k must be >= 1, got {opts['k']}")
    run = retrieve_all(queries, docs, k=opts["k"], similarity=opts["similarity"])
    write_run(out, run, tag=opts["tag"])
    print(f"retrieved top-{opts['k']} for {len(run)} queries -> {out}")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

EVALUATE_DEFAULTS = dict(run=None, qrels=None, output_dir=None)


def cmd_evaluate(opts: dict) -> int:
    _require(opts, "run", "qrels")
    run = read_run(_input_path(opts, "run"))
    qrels = read_qrels(_input_path(opts, "qrels"))
    results = evaluate_run(run, qrels)
    print(format_metric_table(results))
    if opts["output_dir"] is not None:
        out_dir = _output_dir(opts, "output_dir")
        report = write_metric_report(out_dir, results)
        means = {name: mean for name, (_, mean) in results.items()}
        figures.metric_bars(means, out_dir / "metrics.png")
        ndcg10 = results["ndcg@10"][0]
        figures.per_query_histogram([ndcg10[q] for q in sorted(ndcg10)],
                                    "ndcg@10", out_dir / "ndcg_at_10_hist.png")
        log.info("report %s", report)
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

COMPARE_DEFAULTS = dict(run_a=None, run_b=None, qrels=None, output_dir=None,
                        num_comparisons=len(METRICS), alpha=0.001)


def cmd_compare(opts: dict) -> int:
    _require(opts, "run_a", "run_b", "qrels")
    path_a = _input_path(opts, "run_a")
    path_b = _input_path(opts, "run_b")
    run_a = read_run(path_a)
    run_b = read_run(path_b)
    qrels = read_qrels(_input_path(opts, "qrels"))
    if set(run_a) != set(run_b):
        only_a = sorted(set(run_a) - set(run_b))[:5]
        only_b = sorted(set(run_b) - set(run_a))[:5]
        raise InputError(f"runs cover different queries; only in {path_a.name}: "
                         f"{only_a}, only in {path_b.name}: {only_b}")
    results_a = evaluate_run(run_a, qrels)
    results_b = evaluate_run(run_b, qrels)

    label_a, label_b = path_a.stem, path_b.stem
    width = max(len(m) for m in METRICS)
    header = (f"{'metric'.ljust(width)}  {label_a[:12]:>12} {label_b[:12]:>12} "
              f"{'t':>9} {'p(corr)':>10}  sig")
    lines = [header, "-" * len(header)]
    rows = []
    for name in METRICS:
        pq_a, mean_a = results_a[name]
        pq_b, mean_b = results_b[name]
        qids = sorted(pq_a)
        result = paired_ttest_bonferroni([pq_a[q] for q in qids],
                                         [pq_b[q] for q in qids],
                                         num_comparisons=opts["num_comparisons"],
                                         alpha=opts["alpha"])
        rows.append((name, mean_a, mean_b, result))
        lines.append(f"{name.ljust(width)}  {mean_a:>12.4f} {mean_b:>12.4f} "
                     f"{result.t_statistic:>9.3f} {result.corrected_p:>10.3e}  "
                     f"{result.marker()}")
    print("\n".join(lines))

    if opts["output_dir"] is not None:
        out_dir = _output_dir(opts, "output_dir")
        with open(out_dir / "compare.tsv", "w", encoding="utf-8") as fh:
            fh.write("metric\tcutoff\tmean_a\tmean_b\tt\traw_p\tcorrected_p\t"
                     "significant\n")
            for name, mean_a, mean_b, res in rows:
                fh.write(f"{name}\t{metric_cutoff(name)}\t{mean_a:.10g}\t"
                         f"{mean_b:.10g}\t{res.t_statistic:.10g}\t"
                         f"{res.raw_p:.10g}\t{res.corrected_p:.10g}\t"
                         f"{int(res.significant)}\n")
        figures.comparison_bars([(n, a, b, r.significant) for n, a, b, r in rows],
                                label_a, label_b, out_dir / "compare.png")
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

GRADCHECK_DEFAULTS = dict(dim=8, num_domains=3, batch_size=4, h=1e-4, tol=1e-4,
                          seed=0, similarity="dot", gate_normalization="none",
                          temperature=1.0, loss_weight=1.0, inject_fault=False)


def cmd_gradcheck(opts: dict) -> int:
    rng = Rng(opts["seed"])
    d, m, b = opts["dim"], opts["num_domains"], opts["batch_size"]
    params = init_params(d, m, rng.spawn(0), dtype=np.float64,
                         residual_init="glorot")
    # nonzero biases so every ReLU region and gradient path is exercised
    for i, (_, arr) in enumerate(named_arrays(params)):
        if arr.ndim == 1:
            arr += 0.05 * rng.spawn(100 + i).normal(arr.shape)
    batch = Batch(queries=rng.spawn(1).normal((b, d)),
                  docs=rng.spawn(2).normal((b, d)),
                  labels=(rng.spawn(3).uniform((b, m)) < 0.4).astype(np.float64))
    config = TrainConfig(similarity=opts["similarity"],
                         gate_normalization=opts["gate_normalization"],
                         temperature=opts["temperature"],
                         loss_weight=opts["loss_weight"], dtype="float64")
    nudge_off_relu_kinks(params, batch, threshold=20 * opts["h"])
    corrupt = "specializers.0.w_up" if opts["inject_fault"] else None
    report = grad_check(params, batch, config, h=opts["h"], tol=opts["tol"],
                        corrupt_param=corrupt)
    print(report.summary())
    if not report.passed:
        raise NumericalError(f"gradient check failed: {report.summary()}")
    return 0


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

SYNTH_DEFAULTS = dict(output_dir=None, num_domains=4, docs_per_domain=200,
                      queries_per_domain=50, dim=32, noise=DEFAULT_NOISE,
                      seed=7, doc_spread=DOC_SPREAD, offset_scale=OFFSET_SCALE,
                      scale=SCALE)


def cmd_synth(opts: dict) -> int:
    _require(opts, "output_dir")
    bench = synth_benchmark(
        num_domains=opts["num_domains"], docs_per_domain=opts["docs_per_domain"],
        queries_per_domain=opts["queries_per_domain"], dim=opts["dim"],
        noise=opts["noise"], seed=opts["seed"], doc_spread=opts["doc_spread"],
        offset_scale=opts["offset_scale"], scale=opts["scale"])
    paths = write_benchmark(bench, _output_dir(opts, "output_dir"))
    print(f"benchmark: {len(bench.docs)} docs, {len(bench.queries)} queries, "
          f"{len(bench.domains)} domains -> {opts['output_dir']}")
    print(bench.label_coverage().summary())
    for name in sorted(paths):
        log.info("wrote %s", paths[name])
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="key-value config file (CLI flags take precedence)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="cap BLAS parallelism (advisory; outputs do not "
                             "depend on it)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress config echo and progress logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmoe",
                     description="Query-specialization mixture-of-experts "
                                 "toolkit for dense retrieval")
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    def _add_command(sub, name: str, func, defaults: dict, help_text: str,
                     flags: dict[str, dict]) -> None:
        p = sub.add_parser(name, help=help_text, description=help_text,
                           parents=[common])
        for opt, kwargs in flags.items():
            p.add_argument("--" + opt.replace("_", "-"), default=None,
                           dest=opt, **kwargs)
        p.set_defaults(_func=func, _defaults=defaults, _command=name)

    path_kw = dict(metavar="FILE")
    _add_command(sub, "label", cmd_label, LABEL_DEFAULTS,
                 "derive multi-label query domains from a category graph", {
                     "graph": path_kw, "top_categories": path_kw,
                     "doc_categories": path_kw, "qrels": path_kw,
                     "output": path_kw,
                     "max_depth": dict(type=int, metavar="N"),
                 })
    _add_command(sub, "train", cmd_train, TRAIN_DEFAULTS,
                 "train the mixture module on frozen embeddings", {
                     "queries": path_kw, "docs": path_kw, "qrels": path_kw,
                     "labels": path_kw, "checkpoint": path_kw,
                     "log_file": path_kw,
                     "batch_size": dict(type=int, metavar="N"),
                     "learning_rate": dict(type=float, metavar="LR"),
                     "epochs": dict(type=int, metavar="N"),
                     "validation_fraction": dict(type=float, metavar="F"),
                     "temperature": dict(type=float, metavar="T"),
                     "loss_weight": dict(type=float, metavar="W"),
                     "seed": dict(type=int, metavar="SEED"),
                     "similarity": dict(choices=["dot", "cosine"]),
                     "gate_normalization": dict(choices=["none", "sum"]),
                     "dtype": dict(choices=["float32", "float64"]),
                 })
    _add_command(sub, "transform", cmd_transform, TRANSFORM_DEFAULTS,
                 "apply a trained module to query embeddings", {
                     "checkpoint": path_kw, "input": path_kw, "output": path_kw,
                     "mode": dict(choices=["weighted", "top1", "rnd-g"]),
                     "seed": dict(type=int, metavar="SEED"),
                     "gate_normalization": dict(choices=["none", "sum"]),
                 })
    _add_command(sub, "retrieve", cmd_retrieve, RETRIEVE_DEFAULTS,
                 "exact top-k dense retrieval to a TREC run file", {
                     "queries": path_kw, "docs": path_kw, "output": path_kw,
                     "k": dict(type=int, metavar="K"),
                     "similarity": dict(choices=["dot", "cosine"]),
                     "tag": dict(metavar="TAG"),
                 })
    _add_command(sub, "evaluate", cmd_evaluate, EVALUATE_DEFAULTS,
                 "score a run against qrels on the six standard metrics", {
                     "run": path_kw, "qrels": path_kw,
                     "output_dir": dict(metavar="DIR"),
                 })
    _add_command(sub, "compare", cmd_compare, COMPARE_DEFAULTS,
                 "paired significance tests between two runs", {
                     "run_a": path_kw, "run_b": path_kw, "qrels": path_kw,
                     "output_dir": dict(metavar="DIR"),
                     "num_comparisons": dict(type=int, metavar="N"),
                     "alpha": dict(type=float, metavar="A"),
                 })
    _add_command(sub, "gradcheck", cmd_gradcheck, GRADCHECK_DEFAULTS,
                 "finite-difference check of all training gradients", {
                     "dim": dict(type=int, metavar="D"),
                     "num_domains": dict(type=int, metavar="M"),
                     "batch_size": dict(type=int, metavar="B"),
                     "h": dict(type=float, metavar="H"),
                     "tol": dict(type=float, metavar="TOL"),
                     "seed": dict(type=int, metavar="SEED"),
                     "similarity": dict(choices=["dot", "cosine"]),
                     "gate_normalization": dict(choices=["none", "sum"]),
                     "temperature": dict(type=float, metavar="T"),
                     "loss_weight": dict(type=float, metavar="W"),
                     "inject_fault": dict(action="store_true"),
                 })
    _add_command(sub, "synth", cmd_synth, SYNTH_DEFAULTS,
                 "generate the synthetic domain-shift benchmark", {
                     "output_dir": dict(metavar="DIR"),
                     "num_domains": dict(type=int, metavar="M"),
                     "docs_per_domain": dict(type=int, metavar="N"),
                     "queries_per_domain": dict(type=int, metavar="N"),
                     "dim": dict(type=int, metavar="D"),
                     "noise": dict(type=float, metavar="SD"),
                     "seed": dict(type=int, metavar="SEED"),
                     "doc_spread": dict(type=float, metavar="SD"),
                     "offset_scale": dict(type=float, metavar="NORM"),
                     "scale": dict(type=float, metavar="L"),
                 })
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        logging.basicConfig(stream=sys.stderr, format="qmoe: %(message)s",
                            level=logging.WARNING if ns.quiet else logging.INFO)
        if ns.threads is not None:
            if ns.threads < 1:
                raise InputError("--threads must be >= 1")
            os.environ.setdefault("OMP_NUM_THREADS", str(ns.threads))
            log.info("thread cap requested: %d (advisory)", ns.threads)
        file_values = read_config_file(ns.config) if ns.config else {}
        cli_values = {k: v for k, v in vars(ns).items()
                      if not k.startswith("_") and k not in
                      ("config", "threads", "quiet", "command")}
        opts = resolve_options(ns._defaults, file_values, cli_values)
        if not ns.quiet:
            echo_options(ns._command, opts)
        return ns._func(opts)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
