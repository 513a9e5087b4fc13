"""Static analysis of numerical programs by abstract interpretation and SMT path selection."""

__version__ = "0.1.0"
