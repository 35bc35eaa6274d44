"""Build the NCCTG lung cancer fixture used by the tests.

The raw file ``tests/fixtures/lung_raw.csv`` is the ``lung`` table of the R
``survival`` package as redistributed with lifelines (``lifelines/datasets/
lung.csv``).  That copy recodes ``status`` as 1 = death, 0 = censored.  This
script keeps complete cases on age, sex and ph.ecog, restores the R coding
(2 = death, 1 = censored) and writes ``tests/fixtures/ncctg.csv``.

Usage::

    python scripts/prepare_ncctg.py
"""
from pathlib import Path

import pandas as pd

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "tests" / "fixtures"


def main():
    raw = pd.read_csv(FIXTURES / "lung_raw.csv")
    df = raw.dropna(subset=["age", "sex", "ph.ecog"]).copy()
    assert len(df) == 227, len(df)
    df["status"] = df["status"].astype(int) + 1
    assert (df["status"] == 1).sum() == 63
    df["ph.ecog"] = df["ph.ecog"].astype(int)
    cols = ["time", "status", "age", "sex", "ph.ecog"]
    df[cols].to_csv(FIXTURES / "ncctg.csv", index=False)
    print(f"wrote {len(df)} rows to {FIXTURES / 'ncctg.csv'}")


if __name__ == "__main__":
    main()
