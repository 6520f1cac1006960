import subprocess
import sys

import pytest

CORPUS_ARGS = ["--kinds", "stairs_up,stairs_down,stairs_up,stairs_down,slope_up,flat",
               "--levels", "8,9", "--samples-per-run", "8"]


def make_corpus(path, samples, seed):
    """Generate a dataset through the producer's CLI (external interface)."""
    cmd = [sys.executable, "-m", "stepsafe.cli", "dataset",
           "--samples", str(samples), "--seed", str(seed),
           "--out", str(path)] + CORPUS_ARGS
    subprocess.run(cmd, check=True, capture_output=True)
    return path


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    return make_corpus(tmp_path_factory.mktemp("corpus") / "small", 64, 20)
