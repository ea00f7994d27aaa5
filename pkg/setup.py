"""Build script: compiles the tape evaluator when Cython is available."""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; finslerlab.tape falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("finslerlab._tape", ["src/finslerlab/_tape.pyx"],
                   extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
