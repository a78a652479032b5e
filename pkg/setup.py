"""Build script for the optional compiled recurrent-network kernels.

The package is fully functional without the extension: causalcast.nn.kernels
falls back to a pure numpy implementation when the compiled module is absent.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "causalcast.nn.kernels._speedups",
                ["src/causalcast/nn/kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
