import warnings

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    warnings.warn("Cython/numpy unavailable; installing the pure-Python kernels only")
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "learnplane._kernels",
                ["src/learnplane/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fno-math-errno"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
