"""Wall time of classic against embedding-distance feature extraction.

Times one snapshot per size after a warm-up call compiles the kernels.
Embedding training is reported separately; it is not feature extraction.
"""

import argparse
import time

from clusterfate.embeddings import EmbeddingParams, come_lite
from clusterfate.features.classic import classic_feature_frame
from clusterfate.features.embedding import embedding_feature_frame
from clusterfate.syntgen import GenConfig, generate


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1500,5000,10000")
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    params = EmbeddingParams()
    warm = generate(GenConfig(n_nodes=200, n_snapshots=1, d_max=30))[0][0]
    emb, c, g = come_lite(warm, 5, EmbeddingParams(walks_per_node=1, refine_rounds=0, gmm_restarts=1))
    classic_feature_frame(warm, c)
    embedding_feature_frame(emb, c, g)
    print(f"{'nodes':>6} {'edges':>7} {'embed':>8} {'classic':>8} {'embedding':>9} {'ratio':>6}")
    for n in (int(v) for v in a.sizes.split(",")):
        s = generate(GenConfig(n_nodes=n, n_snapshots=1, seed=a.seed))[0][0]
        (emb, c, g), t_fit = timed(come_lite, s, 5, params, a.seed)
        _, t_cl = timed(classic_feature_frame, s, c)
        _, t_em = timed(embedding_feature_frame, emb, c, g)
        print(f"{len(s):>6} {s.n_edges:>7} {t_fit:>7.1f}s {t_cl:>7.2f}s {t_em:>8.2f}s {t_cl / t_em:>5.1f}x")


if __name__ == "__main__":
    main()
