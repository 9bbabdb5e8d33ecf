import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

# No -ffast-math: the kernels rely on exact IEEE compensated summation.
extensions = [
    Extension(
        "latticeclock.kernels._core",
        ["src/latticeclock/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
