"""avsal: audio-visual saliency prediction for multiple-face videos."""

__version__ = "0.1.0"
