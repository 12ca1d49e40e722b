import numpy as np

from gtimex.config import ProblemConfig
from gtimex.report import config_header, csv_text, format_value, write_csv


def test_csv_layout():
    text = csv_text(["a", "b"], [(1, 0.5), (2, True)], ["note: 1"])
    assert text.splitlines() == ["# note: 1", "a,b", "1,0.5", "2,true"]


def test_float_roundtrip():
    v = 0.1 + 0.2
    assert float(format_value(np.float64(v))) == v


def test_header_contains_config():
    lines = config_header(ProblemConfig(eps=0.5), {"command": "x"})
    assert 'eps: 0.5' in lines and 'scheme: "GSA342"' in lines and 'command: "x"' in lines


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = write_csv(tmp_path / "sub" / "t.csv", ["x"], [(1,)])
    assert path.read_text() == "x\n1\n"
    assert [p.name for p in path.parent.iterdir()] == ["t.csv"]
