import csv
from pathlib import Path

import numpy as np
import pytest

from tpsurv.model import Dataset

FIXTURES = Path(__file__).parent / "fixtures"
NCCTG_CSV = FIXTURES / "ncctg.csv"
NCCTG_COVARIATES = ["age", "sex", "ph.ecog"]


def read_ncctg():
    with open(NCCTG_CSV, newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = np.array([float(r["time"]) for r in rows])
    event = np.array([r["status"] == "2" for r in rows])
    Z = np.array([[float(r[c]) for c in NCCTG_COVARIATES] for r in rows])
    return t, event, Z


@pytest.fixture(scope="session")
def ncctg_raw():
    return read_ncctg()


@pytest.fixture(scope="session")
def ncctg_csv():
    return str(NCCTG_CSV)


@pytest.fixture(scope="session")
def ncctg(ncctg_raw):
    t, event, Z = ncctg_raw
    return Dataset.from_survival(t, event, Z, NCCTG_COVARIATES)


# acceptance results are collected here and echoed in the terminal summary
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
