import os
import subprocess
import sys

from qdcascade import _backend


def _backend_name(env_value):
    env = dict(os.environ)
    env.pop("QDCASCADE_PURE_PYTHON", None)
    if env_value is not None:
        env["QDCASCADE_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "import qdcascade; print(qdcascade.backend_name)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_fallback_can_be_forced():
    assert _backend_name("1") == "python"


def test_default_prefers_compiled_kernel():
    expected = "cython" if _backend.compiled is not None else "python"
    assert _backend_name(None) == expected


def test_get_by_name():
    assert _backend.get("python").__name__.endswith("_fallback")
    assert _backend.get(None) is _backend.kernel
