"""Layer-wise Gibbs information flow in small multilayer perceptrons."""

__version__ = "0.1.0"
