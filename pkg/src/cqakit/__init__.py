"""Community-QA corpus toolkit: mine QA pairs from StackExchange-style dumps,
clean and decontaminate them, train a desk-scale dual-encoder retriever, and
evaluate lexical and dense retrieval."""

__version__ = "0.1.0"
