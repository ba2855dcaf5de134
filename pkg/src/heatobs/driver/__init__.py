"""Configuration, reconstruction loop, report figures and command line interface."""

from .config import ConfigError, ReconstructionConfig, load_config
from .run import ReconstructionFailed, ReconstructionReport, build_setup, generate_data, run_reconstruction

__all__ = ["ConfigError", "ReconstructionConfig", "load_config", "ReconstructionFailed",
           "ReconstructionReport", "build_setup", "generate_data", "run_reconstruction"]
