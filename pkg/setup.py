"""
@description
setuptools configuration packaging `kicked_top` with its `kicked-top` console script.

Key features:
1. Exposes the kicked_top package and its subpackages
2. 'pip install .' installs the library and the CLI entry point

@dependencies
- setuptools
"""

import setuptools

setuptools.setup(
    name="kicked_top",
    version="0.3.0",
    author="Lab Team",
    description="Quantum kicked top at resonance: QFI scaling, recurrences and dissipation",
    packages=setuptools.find_packages(include=["kicked_top", "kicked_top.*"]),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.4",
        "python-dotenv>=1.0.0",
        "PyYAML>=6.0",
    ],
    extras_require={"test": ["pytest>=7.0"]},
    entry_points={"console_scripts": ["kicked-top=kicked_top.cli:main"]},
    python_requires=">=3.8",
)
