from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "rydarp._kernels._cy_core",
        ["src/rydarp/_kernels/_cy_core.pyx"],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
