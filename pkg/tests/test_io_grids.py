import math

import numpy as np

from qwlecam.grids import DensityGrid
from qwlecam.io import array_checksum, csv_text, dumps_json, format_value, read_csv, write_text_atomic


def test_format_value_round_trips_doubles():
    for v in (0.1, 1 / 3, math.pi, 1e-300, -2.5e17):
        assert float(format_value(v)) == v
    assert format_value(float("nan")) == "nan"


def test_json_is_sorted_and_stable():
    a = dumps_json({"b": 1, "a": np.float64(0.5), "c": np.arange(2)})
    assert a == dumps_json({"c": [0, 1], "a": 0.5, "b": 1})
    assert a.index('"a"') < a.index('"b"')


def test_csv_round_trip(tmp_path):
    text = csv_text(["k", "prob"], [(1, 0.25), (2, 0.75)], comment='{"t": 2}')
    assert "\r\n" in text
    path = write_text_atomic(tmp_path / "x.csv", text)
    meta, cols, rows = read_csv(path)
    assert meta == {"t": 2}
    assert cols == ["k", "prob"]
    assert [float(r[1]) for r in rows] == [0.25, 0.75]


def test_checksum_changes_with_content():
    assert array_checksum(np.zeros(3)) != array_checksum(np.ones(3))


def test_density_grid_mass_and_lookup():
    g = DensityGrid(np.array([0.0, 0.5, 1.0]), np.array([0.4, 1.6]))
    assert g.total_mass() == 1.0
    assert g(0.25) == 0.4 and g(0.75) == 1.6
