from .decoder import MaskDecoder
from .encoder import EncoderBlock, ImageEmbedding, ImageEncoder
from .layers import ChannelLayerNorm, ShiftedLinear, ShiftedPatchEmbed
from .segmenter import PromptableSegmenter
from .text import FileTextEmbedder, HashTextEmbedder, TextAffineLayer

__all__ = [
    "ChannelLayerNorm",
    "EncoderBlock",
    "FileTextEmbedder",
    "HashTextEmbedder",
    "ImageEmbedding",
    "ImageEncoder",
    "MaskDecoder",
    "PromptableSegmenter",
    "ShiftedLinear",
    "ShiftedPatchEmbed",
    "TextAffineLayer",
]
