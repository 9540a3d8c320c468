"""Build script for the optional compiled edit-distance kernel.

The package is fully functional without the extension (a pure-Python
implementation is selected at import time); building it just makes CER
evaluation much faster. Set LACUNA_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("LACUNA_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/lacuna/_editdist.pyx"],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
