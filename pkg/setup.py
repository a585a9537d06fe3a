from setuptools import Extension, setup

# The compiled kernels are optional: without Cython (or a compiler) the build
# still succeeds and the package falls back to the numpy reference kernels.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "openqb._kernels._core",
                ["src/openqb/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
