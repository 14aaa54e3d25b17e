"""Turn optimization problem descriptions into verified MILP models."""

__version__ = "0.1.0"
