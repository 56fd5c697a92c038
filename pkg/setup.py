import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "tanksep._core",
        ["src/tanksep/_core.pyx", "src/tanksep/lw_kernel.c"],
        include_dirs=[np.get_include(), "src/tanksep"],
        extra_compile_args=["-O3", "-fno-math-errno", "-std=c99"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
