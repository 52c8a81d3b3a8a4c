"""Full-duplex self-interference cancellation simulator."""

__version__ = "0.1.0"
