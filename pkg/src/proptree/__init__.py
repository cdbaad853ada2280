"""Joint mention segmentation and part-of dependency parsing over token sequences.

The package trains a BiLSTM head-selection parser that predicts, for every
token, a (head, relation) pair in one softmax, then repairs its output into a
spanning tree with a maximum-arborescence decoder.  Pipeline baselines (a
linear-chain CRF segmenter feeding local or globally normalized edge
classifiers) are included for comparison, along with corpus tooling, synthetic
data generators, and evaluation utilities.
"""

__version__ = "0.1.0"
