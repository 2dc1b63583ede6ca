import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython the package installs and
# runs on the pure-Python fallback in cfaudit._pykernels.
ext_modules = []
if os.environ.get("CFAUDIT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "cfaudit._kernels",
                    ["src/cfaudit/_kernels.pyx"],
                    # the compiled and fallback paths must agree bit for bit:
                    # no FMA contraction, and no fusing of sin/cos into
                    # sincos (which rounds differently in the last place)
                    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-builtin-sin", "-fno-builtin-cos"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
