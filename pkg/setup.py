import os

from setuptools import Extension, setup

# The compiled kernel is an optimisation, not a requirement: if Cython is not
# available (or ERGCBF_NO_EXT=1 is set) the package installs pure-Python and
# ergcbf._backend falls back to the numpy implementation at import time.
ext_modules = []
if os.environ.get("ERGCBF_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ergcbf._fastcore",
                    sources=["src/ergcbf/_fastcore.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )

setup(ext_modules=ext_modules)
