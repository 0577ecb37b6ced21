"""Build the optional compiled loss kernels.

The extension is marked optional: when Cython or a C compiler is missing the
package still installs and falls back to the numpy kernels at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [Extension("conceptdetect._kernels", ["src/conceptdetect/_kernels.pyx"],
                   extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
