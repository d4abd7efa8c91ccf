import json

import numpy as np
import pytest

from mbqs.errors import RecordFormatError
from mbqs.records import (ShotRecordSet, atomic_write, read_records, read_table,
                          table_text, write_records, write_table)


def meta(L=4, n=3, **kw):
    m = {"device_id": "test", "L": L, "a_um": 5.0, "g": 1.0, "J": 1.0,
         "initial_state": "down", "t_us": 0.5, "n_shots": n}
    m.update(kw)
    return m


def test_round_trip(tmp_path):
    bits = np.array([[0, 1, 0, 1], [1, 1, 1, 1], [0, 0, 0, 0]])
    rec = ShotRecordSet(meta(), bits)
    path = tmp_path / "shots.txt"
    write_records(path, rec)
    back = read_records(path)
    assert back.meta == rec.meta
    np.testing.assert_array_equal(back.bits, bits)
    assert path.read_text().splitlines()[1] == "0101"


def test_spins_convention():
    rec = ShotRecordSet(meta(n=1), np.array([[0, 1, 1, 0]]))
    np.testing.assert_array_equal(rec.spins(), [[-1, 1, 1, -1]])


@pytest.mark.parametrize("text", [
    "",
    "not json\n0101\n",
    "[1, 2]\n0101\n",
])
def test_bad_header(text):
    with pytest.raises(RecordFormatError):
        ShotRecordSet.loads(text)


def test_row_length_mismatch():
    text = json.dumps(meta(n=2)) + "\n0101\n011\n"
    with pytest.raises(RecordFormatError, match="shot 1"):
        ShotRecordSet.loads(text)


def test_bad_characters():
    with pytest.raises(RecordFormatError):
        ShotRecordSet.loads(json.dumps(meta(n=1)) + "\n01x1\n")


def test_shot_count_mismatch():
    with pytest.raises(RecordFormatError, match="n_shots"):
        ShotRecordSet.loads(json.dumps(meta(n=5)) + "\n0101\n")


def test_missing_metadata():
    m = meta(n=1)
    del m["t_us"]
    with pytest.raises(RecordFormatError, match="t_us"):
        ShotRecordSet(m, np.zeros((1, 4)))


def test_non_binary_values():
    with pytest.raises(RecordFormatError):
        ShotRecordSet(meta(n=1), np.array([[0, 2, 0, 1]]))


def test_table_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rows = [(4, 0.25, "pass"), (5, 1e-17, "fail")]
    write_table(str(path), ["L", "p2", "status"], rows, {"L": "sites", "p2": "-"})
    assert path.read_text().startswith("# units: L [sites], p2 [-], status [-]\n")
    cols, back = read_table(str(path), expected=["L", "p2", "status"])
    assert back == [list(r) for r in rows]
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["rows"][1] == {"L": 5, "p2": 1e-17, "status": "fail"}


def test_table_unexpected_columns(tmp_path):
    path = tmp_path / "t.csv"
    write_table(str(path), ["a"], [(1,)], {}, mirror=False)
    assert not (tmp_path / "t.json").exists()
    with pytest.raises(RecordFormatError):
        read_table(str(path), expected=["b"])


def test_table_ragged_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(RecordFormatError, match="row 1"):
        read_table(str(path))


def test_float_repr_is_lossless():
    x = 0.1 + 0.2
    assert repr(x) in table_text(["x"], [(x,)], {})


def test_numpy_scalars_written_plainly():
    text = table_text(["a", "b"], [(np.int64(3), np.float64(0.25))], {})
    assert text.splitlines()[-1] == "3,0.25"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write(tmp_path / "sub" / "f.txt", "hello")
    assert sorted(p.name for p in (tmp_path / "sub").iterdir()) == ["f.txt"]
