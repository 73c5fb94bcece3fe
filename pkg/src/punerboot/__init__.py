"""Weakly supervised NER: seed dictionaries, compound-edge label expansion,
non-negative PU token classifiers and iterative dictionary bootstrapping."""

from .bootstrap import BootstrapConfig, BootstrapState, harvest_entities, run_bootstrap
from .classifier import PuModel, TrainConfig, empirical_risk, predict, pu_risk, pu_risk_gradient, score, train
from .corpus import I, O, Document, Provenance, Sentence, Tag, TagAssignment, Token, read_conllu, read_gold
from .evaluation import recall_curve, token_prf
from .expansion import expand_labels
from .features import featurize
from .gazetteer import Gazetteer, label_corpus, load_seed, save
from .synthgen import SynthSpec, generate, seed_gazetteer

__version__ = "0.1.0"
