"""Second-order graph-based dependency parsing with unrolled mean-field
inference, exact brute-force oracles, MST decoding and CoNLL-U I/O."""

__version__ = "0.1.0"
