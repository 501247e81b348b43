"""Dataset ingestion: video decoding, audio spectrograms, face crops,
fixation densities and the on-disk clip archive."""
