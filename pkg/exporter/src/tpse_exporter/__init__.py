"""tpse_exporter: encodes prompts and image views into TPSE containers.

The exporter is the offline producer side of the protoshift engine: it
turns prompt texts and images into normalized embedding files plus a
manifest, using either a real vision-language checkpoint or the built-in
deterministic color-probe encoder.
"""

from .container import read_tpse, write_tpse
from .encoders import ColorProbeEncoder, get_encoder
from .jobs import ExportJob, export_prompts, export_views

__version__ = "0.1.0"

__all__ = [
    "ColorProbeEncoder",
    "ExportJob",
    "export_prompts",
    "export_views",
    "get_encoder",
    "read_tpse",
    "write_tpse",
]
