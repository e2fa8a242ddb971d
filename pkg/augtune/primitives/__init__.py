"""Building blocks of an augtune run: generation, scoring, sampling and data IO."""
