"""Dependence-path guided next-API recommendation.

Pipeline: MiniIR programs -> backward slices -> API dependence graphs ->
dependence paths -> skip-gram embeddings -> dual-head LSTM recommender with
hybrid loss -> budget-limited multi-path aggregation -> evaluation.
"""

__version__ = "0.1.0"
