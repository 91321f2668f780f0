"""featsr: single-image 4x super-resolution trained in the feature space of
a fixed, pre-trained, or jointly learned extractor network."""

__version__ = "0.1.0"
