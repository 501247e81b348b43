"""Saliency metrics, dataset-analysis statistics and report emission."""
