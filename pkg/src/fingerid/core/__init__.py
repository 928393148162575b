"""Fingerprint feature extraction and template matching.

Everything in this package is a pure function of its inputs: images and
templates are immutable once built and safe to share across threads.
"""

from fingerid.core.image import GrayImage, PgmError, normalize_image, read_pgm, write_pgm
from fingerid.core.types import Minutia, MinutiaKind, MinutiaeTemplate, template_from_dict, template_to_dict
from fingerid.core.extraction import (
    OrientationField,
    ExtractionConfig,
    binarize,
    crossing_number,
    estimate_orientation,
    extract_minutiae,
    thin,
)
from fingerid.core.matching import LocalDescriptor, MatchConfig, build_descriptor, match_templates

__all__ = [
    "GrayImage",
    "PgmError",
    "normalize_image",
    "read_pgm",
    "write_pgm",
    "Minutia",
    "MinutiaKind",
    "MinutiaeTemplate",
    "template_from_dict",
    "template_to_dict",
    "OrientationField",
    "ExtractionConfig",
    "binarize",
    "crossing_number",
    "estimate_orientation",
    "extract_minutiae",
    "thin",
    "LocalDescriptor",
    "MatchConfig",
    "build_descriptor",
    "match_templates",
]
