"""Natural-gradient boosting for probabilistic regression."""
