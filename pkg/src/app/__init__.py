"""
App module initialization
"""

from .cli import cli, cli_main, compare_directories, dataset_views
from .logging_config import configure_logging

__all__ = ['cli', 'cli_main', 'compare_directories', 'dataset_views', 'configure_logging']
