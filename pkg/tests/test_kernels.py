import os
import subprocess
import sys
from pathlib import Path

import pytest

from retirebound import kernels

ROOT = Path(__file__).resolve().parents[1]


def _backend_under(env_value):
    env = dict(os.environ)
    env.pop("RETIREBOUND_KERNELS", None)
    if env_value is not None:
        env["RETIREBOUND_KERNELS"] = env_value
    out = subprocess.run([sys.executable, "-c", "import retirebound; print(retirebound.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_forces_fallback():
    assert _backend_under("python") == "python"


def test_default_prefers_compiled():
    expected = "compiled" if "compiled" in kernels.available_backends() else "python"
    assert _backend_under(None) == expected


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_benchmark_runs():
    out = subprocess.run([sys.executable, str(ROOT / "benchmarks" / "bench_kernels.py"),
                          "--repeat", "1", "--steps", "20"], capture_output=True, text=True, check=True)
    assert "solve_boundary n=20" in out.stdout
