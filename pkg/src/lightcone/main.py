"""
Lightcone's own 'binary' entrypoint.

Builds the `.LightconeProgram` around the analysis task module.
"""

from . import __version__
from .program import LightconeProgram

program = LightconeProgram(
    name="Lightcone",
    binary="lightcone",
    binary_names=["lightcone"],
    version=__version__,
)
