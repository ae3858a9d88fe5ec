"""Black-box test suite minimization driven by method-level change-proneness."""

__version__ = "0.1.0"
