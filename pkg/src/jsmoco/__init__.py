"""Joint MRI reconstruction with rigid-motion and polynomial coil-sensitivity estimation."""
__version__ = "0.1.0"
