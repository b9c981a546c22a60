"""Tree-structured music notation toolkit.

Data model, canonical XML serialization, MusicXML conversion, and a
three-tier evaluation suite (token counts, tree edit distance, semantic
note metrics) for measure-level music notation trees.
"""

__version__ = "0.1.0"
