import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the fallback backend is used
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("STORAGE_SSC_NO_EXT"):
    npy_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")
    ext_modules = cythonize(
        [
            Extension(
                "storage_ssc._mc_kernel",
                ["src/storage_ssc/_mc_kernel.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[npy_random_lib],
                libraries=["npyrandom"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
