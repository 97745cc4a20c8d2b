"""Smoke test for the newstraj_py extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import json
import tempfile
from pathlib import Path

import newstraj_py as nt

CONFIG = """
schema_version = 1
corpus_path = "corpus.jsonl"
output_dir = "out"
seed = 11
algorithms = ["hdbscan", "dbscan"]

[embeddings]
synthetic = "emb.jsonl"

[dbscan]
eps = 6.0
min_pts = 4

[synthetic]
start_date = "2024-03-01"
dim = 3
topics = [
  { birth_day = 20, arrivals = [6, 3, 3, 3, 3], precursor_days = [5, 12, 18] },
  { birth_day = 20, arrivals = [6, 3, 3, 3, 3], precursor_days = [6, 10, 17] },
]
noise_days = [2, 9, 21, 30, 40]
"""


def check_primitives():
    assert nt.hungarian([[4.0, 1.0], [2.0, 0.0]]) == [(0, 1), (1, 0)]
    assert abs(nt.fleiss_kappa([["A", "A", "B"], ["B", "B", "A"]]) + 1 / 3) < 1e-12
    assert nt.fleiss_kappa([["A", "A"], ["A", "A"]]) is None
    overall, per_doc = nt.majority_agreement([["A"] * 6 + ["B"] * 5])
    assert overall == 6 / 11 and per_doc == [6 / 11]
    assert nt.consensus_curve([["TOA", "TOA"], ["TOA", "x"]], "TOA") == [(1, 1.0), (2, 0.5)]
    assert nt.toa_share(["TOA_first", "TOD_late", "O_old", "T_late"]) == 1 / 3

    assert nt.assign_case(1, t_t=3, t_i=3) == "TOA_first"
    assert nt.assign_case(5, t_t=2, t_i=5) == "T_late"
    assert nt.assign_case(60, t_final=80, theta_delay=26) == "O_recent"

    delays = [1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 8, 10, 12, 14, 18, 22, 26, 34, 40]
    curve = nt.survival_curve(delays)
    assert (curve["p50"], curve["p75"], curve["p90"], curve["p95"]) == (5, 14, 26, 34)
    assert nt.compute_cutoff(delays) == 26

    blob = [[0.1 * i, 0.05 * (i % 3)] for i in range(8)]
    far = [[50 + p[0], 50 + p[1]] for p in blob]
    labels, scores = nt.hdbscan(blob + far + [[200.0, -200.0]], min_cluster_size=5)
    assert len(set(labels[:8])) == 1 and len(set(labels[8:16])) == 1 and labels[16] == -1
    assert len(scores) == 17
    assert nt.dbscan(blob + far, eps=1.0, min_pts=3) == [0] * 8 + [1] * 8
    assert nt.silhouette(blob + far, [0] * 8 + [1] * 8) > 0.7

    reduced = nt.pca({f"d{i}": [float(i), 2.0 * i, 0.5] for i in range(5)}, 1)
    assert len(reduced["d0"]) == 1

    tracker = nt.TopicTracker(0.3)
    assert tracker.align_window(0, [[1.0, 0.0]]) == [("new", 0)]
    assert tracker.align_window(1, [[1.0, 0.05], [0.0, 1.0]]) == [("continued", 0), ("new", 1)]
    assert tracker.created_window(1) == 1


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.toml"
        cfg.write_text(CONFIG)
        nt.synthesize(str(cfg))
        corpus = nt.Corpus.load(str(Path(tmp) / "corpus.jsonl"))
        assert len(corpus) == 47
        assert sum(n for _, n, _ in corpus.daily_counts()) == 47
        vectors = nt.load_embeddings(str(Path(tmp) / "emb.jsonl"), "synthetic", str(Path(tmp) / "corpus.jsonl"))
        assert len(vectors) == 47

        manifest = json.loads(nt.run_pipeline(str(cfg), jobs=2))
        assert all(c["status"] == "ok" for c in manifest["configurations"])
        assert any(a["path"].endswith("trajectories.csv") for a in manifest["artifacts"])


if __name__ == "__main__":
    check_primitives()
    check_pipeline()
    print("smoke test passed")
