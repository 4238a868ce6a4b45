import os
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
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).parent.resolve()

        cfg = "Debug" if self.debug else "Release"
        args = [
            "cmake",
            str(source_dir),
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DPUREKIT_BUILD_TESTS=OFF",
            "-DPUREKIT_BUILD_PYTHON=ON",
            f"-DPython_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(args, cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core", "-j",
             str(os.cpu_count() or 1)],
            cwd=build_dir,
            check=True,
        )
        built = sorted((build_dir / "python" / "purekit").glob("_core*.so"))
        if not built:
            raise RuntimeError("cmake build produced no _core extension")
        ext_path.parent.mkdir(parents=True, exist_ok=True)
        self.copy_file(str(built[0]), str(ext_path))


setup(
    ext_modules=[CMakeExtension("purekit._core")],
    cmdclass={"build_ext": CMakeBuild},
    zip_safe=False,
)
