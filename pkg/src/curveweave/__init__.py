"""Space-filling-curve orderings for structured and unstructured meshes, and
1D convolutional autoencoders trained on SFC-ordered data."""

__version__ = "0.1.0"
