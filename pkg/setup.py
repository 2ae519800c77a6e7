"""Build script for the optional compiled kernels.

    python3 setup.py build_ext --inplace

The package works without the extension (numpy fallback); building it just
makes fitting several times faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("xqdof.kernels._fast", ["src/xqdof/kernels/_fast.pyx"],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
