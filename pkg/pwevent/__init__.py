"""Personalized w-event private publishing for infinite data streams."""

__version__ = '0.1'

# Package Global Variables
TOLERANCE = 1e-9  # Absolute tolerance for budget comparisons
_DATEFMT1 = '%a %b %d %I:%M:%S %p %Y'  # Used in run manifests
