"""Calibration harness for the synthetic benchmark constants.

Sweeps geometry knobs and reports, for each setting: raw-query (base)
NDCG@10, oracle NDCG@10 (true offsets subtracted), NDCG@10 after training
with the default configuration at 20 epochs, and the random-gating
variant of the same checkpoint. Used to pick the constants frozen into
synth.py; not part of the test suite.

Run: python scripts/calibrate_synth.py [--quick]
"""

import argparse
import time

import numpy as np

from qmoe import evaluation, model, synth, training
from qmoe.embio import EmbeddingStore
from qmoe.rng import Rng
from qmoe.stats import paired_ttest_bonferroni


def ndcg10(queries: EmbeddingStore, bench) -> tuple[dict, float]:
    run = evaluation.retrieve_all(queries, bench.docs, k=100, similarity="dot")
    per_query, mean = evaluation.ndcg_at_k(run, bench.qrels, 10)
    return per_query, mean


def examples_from(bench):
    doc_idx = bench.docs.index_map()
    out = []
    for i, qid in enumerate(bench.queries.ids):
        doc_id = sorted(bench.qrels[qid])[0]
        out.append(training.TrainingExample(
            query_id=qid,
            query_embedding=bench.queries.matrix[i],
            positive_doc_embedding=bench.docs.matrix[doc_idx[doc_id]],
            domain_labels=bench.labels[qid]))
    return out


def evaluate_setting(noise, doc_spread, offset_scale, seed, scale=synth.SCALE,
                     epochs=20, lr=1e-5, verbose=False):
    bench = synth.synth_benchmark(noise=noise, seed=seed, doc_spread=doc_spread,
                                  offset_scale=offset_scale, scale=scale)
    base_pq, base = ndcg10(bench.queries, bench)
    _, oracle = ndcg10(bench.oracle_queries(), bench)

    cfg = training.TrainConfig(epochs=epochs, learning_rate=lr, seed=seed)
    t0 = time.time()
    params, logs = training.train(examples_from(bench), cfg)
    train_time = time.time() - t0

    trained_mat = model.transform_batch(bench.queries.matrix, params)
    trained_store = EmbeddingStore(ids=list(bench.queries.ids), matrix=trained_mat)
    trained_pq, trained = ndcg10(trained_store, bench)

    gate_rng = Rng(seed).spawn(99)
    gates = np.stack([model.random_gate(params.num_domains, gate_rng)
                      for _ in range(len(bench.queries))])
    rnd_mat = model.transform_batch(bench.queries.matrix, params, gates=gates)
    _, rndg = ndcg10(EmbeddingStore(ids=list(bench.queries.ids), matrix=rnd_mat), bench)

    qids = sorted(base_pq)
    ttest = paired_ttest_bonferroni([trained_pq[q] for q in qids],
                                    [base_pq[q] for q in qids], num_comparisons=6)
    ok = (trained - base >= 0.05) and (trained >= rndg) and ttest.significant \
        and (oracle - base >= 0.15)
    line = (f"L={scale:g} noise={noise:.2e} spread={doc_spread:.2e} "
            f"off={offset_scale:.2e} seed={seed}: base={base:.3f} "
            f"oracle={oracle:.3f} trained={trained:.3f} rndg={rndg:.3f} "
            f"t={ttest.t_statistic:.1f} p*={ttest.corrected_p:.1e} "
            f"[{train_time:.1f}s] {'OK' if ok else '--'}")
    print(line, flush=True)
    if verbose and logs:
        for log in logs[::5]:
            print(f"   epoch {log.epoch}: train={log.train_total:.6f} "
                  f"val={log.val_total:.6f}")
    return ok


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--seeds", type=int, nargs="*", default=[7])
    args = ap.parse_args()

    if args.quick:
        for seed in args.seeds:
            evaluate_setting(synth.DEFAULT_NOISE, synth.DOC_SPREAD,
                             synth.OFFSET_SCALE, seed, verbose=True)
        return

    dim = 32
    for scale in [100.0, 300.0, 1000.0]:
        for chord in [0.5, 1.0, 2.0]:
            spread = chord / (np.sqrt(2 * dim) * scale)
            for beta in [0.7, 1.0, 1.5]:
                off = beta * chord
                noise = 0.1 * chord / np.sqrt(dim)
                for seed in args.seeds:
                    evaluate_setting(noise, spread, off, seed, scale=scale)


if __name__ == "__main__":
    main()
