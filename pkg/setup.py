from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "orbx._stream._core",
        ["src/orbx/_stream/_core.pyx"],
        extra_compile_args=["-O3"],
        optional=True,  # package falls back to the pure-Python backend
    )
]

if cythonize is not None:
    extensions = cythonize(extensions, compiler_directives={"language_level": "3"})
else:
    extensions = []

setup(ext_modules=extensions)
