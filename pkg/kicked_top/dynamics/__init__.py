"""
Physics layer: collective spin operators, the kicked-top Floquet map,
pure and dissipative propagation, and phase-space diagnostics.
"""
