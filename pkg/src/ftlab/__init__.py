"""Fixed-target runtime analysis of elitist evolutionary algorithms."""
