class AdapterError(Exception):
    """Adapter-side failure: missing weights, bad model output, bad usage."""


class LandmarkError(AdapterError):
    """Landmark detection failed on an input image."""
