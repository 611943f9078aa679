# Builds the optional Cython episode kernel. Without Cython or a C compiler the
# package still installs and falls back to sbgnp._pykernel.
from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("sbgnp._ckernel", ["src/sbgnp/_ckernel.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
