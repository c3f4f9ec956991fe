"""Irregularly clipped sparse regression codes with OAMP decoding."""

from .clipping import ClippingProfile, build_profile, regular_profile, unclipped_profile
from .code import CodeParams, decide_sections, derive_params, encode_message, section_error_rate, synthesize_codeword
from .numerics import dct_forward, dct_inverse, select_rows, slot_rows, truncated_gaussian_moments
from .oamp import DecodeOptions, DecodeResult, decode

__version__ = "0.1.0"
