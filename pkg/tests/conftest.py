import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from predex.dataset import Dataset
from predex.scoring import ScoreVector

# T1 fixture (rows listed 1-6 in design notes; row ids here are 0-based):
# 0 Boston/30/9.0, 1 Boston/31/8.0, 2 Chicago/30/7.0,
# 3 NYC/50/1.0, 4 NYC/55/1.0, 5 Chicago/52/1.0
T1_CITIES = ["Boston", "Boston", "Chicago", "NYC", "NYC", "Chicago"]
T1_TEMPS = [30.0, 31.0, 30.0, 50.0, 55.0, 52.0]
T1_SCORES = [9.0, 8.0, 7.0, 1.0, 1.0, 1.0]


@pytest.fixture
def t1():
    ds = Dataset.from_columns(
        {"city": T1_CITIES, "temp": T1_TEMPS},
        {"city": "categorical", "temp": "numeric"},
    )
    return ds, ScoreVector(T1_SCORES)


@pytest.fixture
def t1_csv(tmp_path):
    lines = ["city,temp,score"]
    for c, t, s in zip(T1_CITIES, T1_TEMPS, T1_SCORES):
        lines.append(f"{c},{t},{s}")
    path = tmp_path / "t1.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
