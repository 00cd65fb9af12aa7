import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ATVMC_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python fallback is selected at import time
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "atvmc._kernels",
                    ["src/atvmc/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
