"""Articulated scene descriptors, URDF I/O and the non-learned parts of an image-to-URDF pipeline."""

from .errors import UrdforgeError
from .scene import (
    BBox3,
    ClassLabel,
    DatasetManifest,
    JointSpec,
    ManifestEntry,
    ObjectNode,
    ParentRef,
    Room,
    SceneDescriptor,
    Transform,
    validate,
)
from .urdf import from_urdf, to_urdf

__version__ = "0.1.0"

__all__ = [
    "BBox3",
    "ClassLabel",
    "DatasetManifest",
    "JointSpec",
    "ManifestEntry",
    "ObjectNode",
    "ParentRef",
    "Room",
    "SceneDescriptor",
    "Transform",
    "UrdforgeError",
    "from_urdf",
    "to_urdf",
    "validate",
    "__version__",
]
