import csv
import json

import pytest

from xfemflow.cli import main
from xfemflow.runner import COLUMNS

PLATE = {"name": "plate", "case": "flat_plate", "method": "xfem", "order": "quadratic",
         "enrichment": {"strategy": "radius", "r_enri": 0.2}, "mesh": {"delta_h": 0.125}}
RECT = {"name": "rect", "case": "heaving_rectangle", "method": "fem", "order": "linear",
        "mesh": {"n_rx": 105, "n_ox": 300, "n_oy": 60}, "physics": {"omega2B_2g": [1.0]}}


def write(tmp_path, data, name="case.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_plate(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, PLATE)), "--out", str(out)]) == 0
    rows = read_rows(out / "plate.csv")
    assert len(rows) == 1
    assert rows[0]["n_p"] == "3288"
    assert float(rows[0]["l2_error"]) < 1e-3
    assert "plate.csv" in capsys.readouterr().out
    payload = json.loads((out / "plate.json").read_text())
    assert payload["columns"] == list(COLUMNS)
    assert payload["rows"][0]["n_p"] == 3288


def test_csv_header(tmp_path):
    out = tmp_path / "out"
    main(["run", str(write(tmp_path, PLATE)), "--out", str(out)])
    with open(out / "plate.csv") as fh:
        assert next(csv.reader(fh)) == list(COLUMNS)


@pytest.mark.slow
def test_run_rectangle_linear_fem_mesh2(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, RECT)), "--out", str(out)]) == 0
    row = read_rows(out / "rect.csv")[0]
    assert row["n_p"] == "78526"
    assert row["strategy"] == "" and row["l2_error"] == ""
    assert float(row["a33_nd"]) > 0 and float(row["b33_nd"]) > 0


@pytest.mark.parametrize("patch", [
    {"enrichment": {"strategy": "ring"}},
    {"unknown_key": 1},
    {"case": "sphere"},
    {"enrichment": {"r_enri": -0.1}},
])
def test_invalid_config_exits_2(tmp_path, capsys, patch):
    data = {**PLATE, **patch}
    assert main(["run", str(write(tmp_path, data))]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_single_point_sweep_warns(tmp_path, capsys):
    data = {**PLATE, "mesh": {"delta_h": 0.5}}
    out = tmp_path / "out"
    code = main(["sweep", str(write(tmp_path, data)), "--axis", "delta_h", "--values", "0.5",
                 "--out", str(out)])
    assert code == 0
    assert "fewer than 3" in capsys.readouterr().err
    payload = json.loads((out / "plate_sweep_delta_h.json").read_text())
    assert payload["slopes"] == {}


def test_sweep_rows_in_axis_order(tmp_path, capsys):
    data = {**PLATE, "method": "fem", "order": "linear"}
    out = tmp_path / "out"
    code = main(["sweep", str(write(tmp_path, data)), "--axis", "delta_h",
                 "--values", "0.5", "0.25", "0.125", "--workers", "2", "--out", str(out)])
    assert code == 0
    rows = read_rows(out / "plate_sweep_delta_h.csv")
    assert [r["delta_h"] for r in rows] == ["0.5", "0.25", "0.125"]
    assert [r["n_p"] for r in rows] == ["84", "296", "1104"]
    slopes = json.loads(capsys.readouterr().out.splitlines()[0])["slopes"]
    assert 0.6 < slopes["l2_error"] < 1.2


def test_reruns_identical(tmp_path):
    cfg = write(tmp_path, {**PLATE, "mesh": {"delta_h": 0.25}})
    texts = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        main(["run", str(cfg), "--out", str(out)])
        rows = read_rows(out / "plate.csv")
        for r in rows:
            r.pop("seconds")
        texts.append(rows)
    assert texts[0] == texts[1]


def test_bad_axis_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["sweep", str(write(tmp_path, PLATE)), "--axis", "depth"])
