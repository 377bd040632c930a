"""vendorlens: link vendor accounts across marketplace ad corpora.

Subpackages cover the full pipeline: corpus ingestion and splits, character
and token stylometric similarity, sparse lexical features, a small from-scratch
neural stack, evaluation metrics, representation-space comparison, open-set
alias identification, and low-resource market transfer.
"""

__version__ = "0.1.0"
