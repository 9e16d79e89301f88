"""Exports neural captioning ensembles into the selection engine's schemas."""

__version__ = "0.1.0"

from .export import ExportJob, export_ensemble_records
from .model import Captioner, CaptionerConfig, init_checkpoint, load_checkpoint, save_checkpoint
from .schema import validate_ensemble_records, validate_features
