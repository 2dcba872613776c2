"""Backend selection through the environment, checked in fresh interpreters."""

import os
import subprocess
import sys

import numpy as np
import pytest

from morphguard import _backend

SCRIPT = """
import sys
from morphguard._backend import backend_name
from morphguard.cli import main
print(backend_name())
main(["simulate", "--d", "24", "--n", "40", "--samples", "5", "--seed", "5", "--out", sys.argv[1]],
     standalone_mode=False)
"""


def run_with(env_value, out):
    env = dict(os.environ)
    env["MORPHGUARD_DISABLE_NUMBA"] = env_value
    proc = subprocess.run([sys.executable, "-c", SCRIPT, str(out)], env=env, capture_output=True, text=True, check=True)
    return proc.stdout.strip()


def load(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, usecols=range(5, 29))


def test_disable_flag_selects_numpy(tmp_path):
    assert run_with("1", tmp_path / "a.csv") == "numpy"
    assert run_with("yes", tmp_path / "b.csv") == "numpy"
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.skipif(not _backend.HAS_NUMBA, reason="numba not installed")
def test_backends_agree(tmp_path):
    assert run_with("0", tmp_path / "fast.csv") == "numba"
    assert run_with("1", tmp_path / "slow.csv") == "numpy"
    fast, slow = tmp_path / "fast.csv", tmp_path / "slow.csv"
    ids = lambda p: [line.split(",", 2)[:2] for line in p.read_text().splitlines()]
    assert ids(fast) == ids(slow)
    # summation order differs between BLAS and the compiled loops
    assert np.max(np.abs(load(fast) - load(slow))) < 1e-12


@pytest.mark.parametrize("raw, expected", [("", 4), ("2", 2), ("99", 4), ("0", 1), ("x", 4)])
def test_thread_cap(monkeypatch, raw, expected):
    monkeypatch.setattr(os, "cpu_count", lambda: 4)
    monkeypatch.setenv("MORPHGUARD_THREADS", raw)
    assert _backend.max_threads() == expected
