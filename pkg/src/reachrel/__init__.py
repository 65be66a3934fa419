"""Taylor-model reachability and operational-profile reliability for neural-network controllers."""

__version__ = "0.1.0"
