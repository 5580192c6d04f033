"""Batch sentence-embedding exporter for requirements CSV files."""

from .encoders import EncoderError, get_encoder
from .export import ExportError, ExportJob, export

__version__ = "0.1.0"
