from setuptools import Extension, setup

# The compiled kernels are an optional speedup: when Cython or a C compiler
# is unavailable the install must still succeed, with lossfair.kernels
# falling back to the numpy implementation at import time.
try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "lossfair._kernels",
                ["src/lossfair/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ]
    )

setup(ext_modules=ext_modules)
