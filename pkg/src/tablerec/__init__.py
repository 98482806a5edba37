"""Related-table recommendation: semantic matching features, baselines and evaluation."""

__version__ = "0.1.0"
