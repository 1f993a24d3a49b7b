"""Batch segmentation bridge.

Turns directories of RGB view PNGs into ground-affordance mask PNGs in the
navigation core's exchange format (`<name>.mask.png`, 8-bit grayscale,
255 = ground). The bridge is file-based on purpose: the heavyweight
segmentation runtime stays decoupled from episode execution, and the core
picks masks up purely by naming convention.
"""

from .bridge import BridgeJob, ImageStatus, Manifest, segment_batch

__all__ = ["BridgeJob", "ImageStatus", "Manifest", "segment_batch"]
__version__ = "0.1.0"
