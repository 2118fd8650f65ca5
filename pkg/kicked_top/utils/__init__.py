"""
@description
Marks the 'utils' directory as a Python package.
Contains the shared logger and the YAML/config helpers.
"""
