"""vizforge: instruction-code data synthesis pipeline and visualization bench."""

__version__ = "0.1.0"
