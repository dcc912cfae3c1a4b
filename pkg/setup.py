from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernel core is optional: if the build fails (no compiler),
# the package falls back to the numpy kernels at import time.
extensions = [
    Extension(
        "ibgraph._ckernels",
        ["src/ibgraph/_ckernels.pyx"],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
