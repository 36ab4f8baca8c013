"""Bridge real CNN activations into conceptcover datasets."""

from .deconv import deconv_plane, deconv_support, forward_features, predict_label
from .export import ExportConfig, export, export_image, load_config
from .model import ModelBundle, build_model

__version__ = "0.1.0"
