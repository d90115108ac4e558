"""reborn: born-reusable scientific knowledge tooling.

Template registry and aggregation graph service, supplementary-data JSON-LD
codec, DOI-metadata interlinking and discovery, and harvesters.
"""

__version__ = "0.1.0"
