"""Build script: compiles the optional scalar-kernel extension when Cython is present.

The package works without the extension (a pure-Python fallback is selected at
import time), so any build failure here downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/nessedp/_kernels/_core.pyx"],
        compiler_directives={"language_level": 3},
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
except Exception as exc:  # pragma: no cover - depends on build host
    print(f"nessedp: skipping compiled kernels ({exc!r}); "
          "pure-Python fallback will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
