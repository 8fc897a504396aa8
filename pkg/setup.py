import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DYNGEM_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("dyngem._kernels", ["src/dyngem/_kernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
