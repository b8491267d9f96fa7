"""CMake-driven build of the tomornn._core extension.

The C++ core, CLI and tests are plain CMake; this setup only wires the
pybind11 module into a pip-installable package. Use
`pip install -e . --no-build-isolation` for development installs.
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        cfg = "Release"
        cmake_args = [
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DTOMORNN_BUILD_TESTS=OFF",
            "-DTOMORNN_BUILD_PYTHON=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        try:
            import pybind11

            cmake_args.append(f"-Dpybind11_DIR={pybind11.get_cmake_dir()}")
        except ImportError:
            pass
        if "CMAKE_ARGS" in os.environ:
            cmake_args += os.environ["CMAKE_ARGS"].split()

        subprocess.run(["cmake", "-S", str(source_dir), "-B", str(build_dir)]
                       + cmake_args, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core", "-j"],
            check=True,
        )

        built = None
        for candidate in build_dir.rglob("_core*.so"):
            built = candidate
            break
        if built is None:
            raise RuntimeError("CMake did not produce the _core extension")
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[CMakeExtension("tomornn._core")],
    cmdclass={"build_ext": CMakeBuild},
)
