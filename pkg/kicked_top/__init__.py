"""
@description
Marks 'kicked_top' as a Python package: a desk-scale simulator for the
quantum kicked top operated at quantum resonance as a metrology sensor.

@notes
- Subpackages: dynamics (physics kernels), analysis (fits and sweeps),
  db (result files and cache), controllers (CLI command dispatch), utils.
"""

__version__ = "0.3.0"
