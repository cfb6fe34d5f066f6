"""Compare candidate trees on held-out documents for one replicate.

The per-document held-out log likelihood comes from fold-in sampling with
training counts frozen; larger trees are also judged by how little
probability they put on their least used path.
"""
import numpy as np

from treetopic.experiments import SelectionConfig, pca_projection, run_selection_experiment, true_params, two_path_tree
from treetopic.model import sample_corpus

cfg = SelectionConfig(replicates=1, chains=2, iters=400, burnin=300, heldout_S=20, seed=5)
rep = run_selection_experiment(cfg)
h, names = rep.table("heldout_loglik")
pi, _ = rep.table("min_path_prob")
for name, v, p in zip(names, h[0], pi[0]):
    print(f"{name}: heldout/doc={v:9.3f}  min path prob={p:.3f}")

# a two-axis view of document word frequencies with the true topics
truth = true_params(two_path_tree(), cfg.V, cfg.alpha0, 0)
corpus, latent = sample_corpus(truth, 300, 60, seed=1)
pca = pca_projection(corpus, truth.topics)
print("leading singular values:", np.round(pca.singular_values[:4], 3))
print("topic coordinates:\n", np.round(pca.vertex_coords, 3))
