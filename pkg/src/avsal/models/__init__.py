"""Network modules: visual, audio and face branches plus the fusion head."""
