"""Virtual fluorescence-spot spectroscopy lab for the Yb 398.9 nm line.

Simulates an effusive Yb beam crossed by four counter-propagating laser
beams, synthesizes the fluorescence-spot images a camera would see, and
recovers resonance frequencies, isotope shifts and the mean beam velocity
from spot alignment -- plus a pump/probe saturation-spectroscopy cross
check.
"""

from spotlab.ybdata import load_catalog

__version__ = "0.1.0"

__all__ = ["load_catalog", "__version__"]
