"""User interface components."""

from .cli import build_parser, main
from .loading import LoadingIndicator

__all__ = ['LoadingIndicator', 'build_parser', 'main']
