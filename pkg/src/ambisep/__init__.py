"""Foreground-background separation of ambient sound scenes."""
from .audio_io import AudioClip, fit_to_duration, read_wav, rms, write_wav
from .frontend import FrontendConfig, PcenParams

__version__ = "0.1.0"
