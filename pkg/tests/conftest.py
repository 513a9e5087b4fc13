import glob
import os
import shutil

import pytest

from pagai.smt.session import SolverSession

CORPUS_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "src", "pagai", "corpus")
CORPUS_DIR = os.path.normpath(CORPUS_DIR)
HAVE_Z3 = shutil.which("z3") is not None

requires_z3 = pytest.mark.skipif(not HAVE_Z3, reason="z3 not on PATH")


def corpus_path(name: str) -> str:
    return os.path.join(CORPUS_DIR, name + ".mimp")


def corpus_files() -> list[str]:
    return sorted(glob.glob(os.path.join(CORPUS_DIR, "*.mimp")))


@pytest.fixture
def session():
    if not HAVE_Z3:
        pytest.skip("z3 not on PATH")
    s = SolverSession()
    yield s
    s.close()
