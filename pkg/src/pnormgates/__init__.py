"""p-norm gated Highway Networks and GRUs with hand-written backpropagation."""

__version__ = "0.1.0"
