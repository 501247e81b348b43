"""Staged training: configuration, KL loss, checkpoints and the stage
state machine."""
