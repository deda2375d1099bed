"""Build the optional Cython kernels; the package works without them."""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("ROBUST_PWM_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "robust_pwm._core",
                    ["src/robust_pwm/_core.pyx"],
                    include_dirs=[np.get_include()],
                    language="c++",
                    # no fused multiply-add: keeps results bit-identical to the numpy fallback
                    extra_compile_args=[] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
