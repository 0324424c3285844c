"""Text-to-embedding exporter writing the shared DEMB container."""

from .demb import write_embeddings
from .encoders import HashingEncoder, ModelResolutionError, resolve_encoder
from .export import ExportError, ExportJob, ExportReport, run_export

__version__ = "0.1.0"
