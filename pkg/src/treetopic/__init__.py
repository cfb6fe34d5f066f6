"""Tree-directed topic models.

Directed rooted trees (:mod:`treetopic.drt`), polytope geometry and metrics
(:mod:`treetopic.geometry`), the generative model with exact small-instance
likelihoods (:mod:`treetopic.model`), a collapsed Gibbs sampler
(:mod:`treetopic.gibbs`), simulation harnesses (:mod:`treetopic.experiments`)
and file formats (:mod:`treetopic.io`).
"""
__version__ = "0.1.0"

from .drt import Drt, build_drt, enumerate_paths, isomorphism, membership, reconstruct_from_path_sets
from .errors import *  # noqa: F401,F403
from .geometry import HierarchyParams, Polytope, TopicMap
from .gibbs import Hyper, run_chain, run_chains
from .model import Corpus, ModelParams, make_params, sample_corpus
