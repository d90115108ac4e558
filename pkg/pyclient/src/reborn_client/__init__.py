"""In-script authoring client for the reborn registry.

Connect, materialize templates into constructor functions, instantiate
findings with native data frames, serialize JSON-LD supplementary data,
trigger harvests, and pull tabular resources back as data frames.
"""

from .constructors import TemplateInstance
from .errors import ClientError
from .session import RebornClient

__version__ = "0.1.0"

__all__ = ["RebornClient", "TemplateInstance", "ClientError"]
