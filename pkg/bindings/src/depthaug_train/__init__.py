"""Training-loop binding for the depthaug augmentation engine."""

from .transform import BoundTransform, bound_jitter, load_records

__version__ = "0.1.0"
__all__ = ["BoundTransform", "bound_jitter", "load_records"]
