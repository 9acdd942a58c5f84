"""codevision: code-as-tool visual reasoning environment kit."""

__version__ = "0.1.0"
