"""Source code package for the multimodal edit lab."""

__version__ = "0.1.0"
