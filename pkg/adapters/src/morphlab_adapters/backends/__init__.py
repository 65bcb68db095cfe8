from ..errors import AdapterError
from .base import FRS_NAMES, Backend, cosine_similarity
from .synthetic import SyntheticBackend

BACKEND_NAMES = ("torchscript", "synthetic")


def get_backend(name: str) -> Backend:
    if name == "synthetic":
        return SyntheticBackend()
    if name == "torchscript":
        from .torchscript import TorchScriptBackend

        return TorchScriptBackend()
    raise AdapterError(f"unknown backend {name!r}; expected one of {BACKEND_NAMES}")


__all__ = [
    "Backend",
    "BACKEND_NAMES",
    "FRS_NAMES",
    "SyntheticBackend",
    "cosine_similarity",
    "get_backend",
]
