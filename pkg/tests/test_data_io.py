import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verhulst_solow import data_io
from verhulst_solow.allometry import TimeSeries
from verhulst_solow.data_io import DataError, bundled, export_csv, load_csv
from verhulst_solow.integrator import IntegratorConfig, integrate


def write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoad:
    def test_three_rows(self, tmp_path):
        s = load_csv(write(tmp_path, "year,pop\n1,10\n2,20\n3,30\n"))
        assert len(s) == 3 and s.name == "pop"

    def test_sorts(self, tmp_path):
        s = load_csv(write(tmp_path, "year,v\n3,1\n-1,2\n"))
        assert s.years.tolist() == [-1.0, 3.0]

    def test_duplicate_year(self, tmp_path):
        with pytest.raises(DataError, match=r":3: duplicate year"):
            load_csv(write(tmp_path, "year,v\n1,1\n1,2\n"))

    def test_malformed_line_number(self, tmp_path):
        with pytest.raises(DataError, match=r":3:"):
            load_csv(write(tmp_path, "year,v\n1,1\n2,abc\n"))

    def test_non_positive(self, tmp_path):
        with pytest.raises(DataError, match=r":2: value"):
            load_csv(write(tmp_path, "year,v\n1,0\n"))

    def test_missing_column(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(write(tmp_path, "year,v\n1,1\n"), "other")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")


class TestBundled:
    def test_population_span(self):
        assert bundled("population").primary.span == (-10000.0, 2020.0)

    def test_energy_span(self):
        assert bundled("energy").primary.span == (1820.0, 2020.0)

    def test_gnp_span(self):
        assert bundled("gnp").primary.span == (0.0, 2020.0)

    def test_provenance_has_date(self):
        for ds_id in data_io.available():
            ds = bundled(ds_id)
            assert ds.provenance and "2026-10-15" in ds.provenance

    def test_oil_two_series(self):
        ds = bundled("oil_reserves")
        assert set(ds.series) == {"reserves", "consumption"}

    def test_unknown(self):
        with pytest.raises(KeyError):
            bundled("coal")

    def test_env_override(self, tmp_path, monkeypatch):
        root = tmp_path / "data"
        root.mkdir()
        (root / "x.csv").write_text("year,x\n1,2\n2,3\n")
        (root / "manifest.json").write_text(json.dumps({"x": {
            "description": "d", "provenance": "p 2026-10-15",
            "series": {"x": {"path": "x.csv", "year_column": "year", "value_column": "x"}}}}))
        monkeypatch.setenv(data_io.DATA_ENV, str(root))
        assert data_io.available() == ["x"]
        assert bundled("x").primary.values.tolist() == [2.0, 3.0]


class TestExport:
    def test_round_trip(self, tmp_path):
        s = TimeSeries("v", [-500.0, 0.0, 1820.5], [1 / 3, np.pi, 1e-300])
        export_csv(s, tmp_path / "o.csv")
        back = load_csv(tmp_path / "o.csv")
        assert np.array_equal(back.years, s.years) and np.array_equal(back.values, s.values)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(1e-300, 1e300), min_size=1, max_size=20))
    def test_round_trip_property(self, tmp_path_factory, vals):
        d = tmp_path_factory.mktemp("rt")
        s = TimeSeries("v", np.arange(len(vals), dtype=float), vals)
        export_csv(s, d / "o.csv")
        assert np.array_equal(load_csv(d / "o.csv").values, s.values)

    def test_fixed_precision(self, tmp_path):
        export_csv(TimeSeries("v", [1.0], [1 / 3]), tmp_path / "o.csv", digits=12)
        assert (tmp_path / "o.csv").read_text().splitlines()[1] == "1,0.333333333333"

    def test_trajectory_columns(self, tmp_path):
        tr = integrate(lambda x: -x, [1.0, 2.0, 3.0], IntegratorConfig(t_end=1.0))
        export_csv(tr, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2,x3"
        assert all(len(l.split(",")) == 1 + 3 for l in lines)
        assert len(lines) == 1 + len(tr)

    def test_empty_series_header_only(self, tmp_path):
        export_csv(TimeSeries("v", [], []), tmp_path / "e.csv")
        assert (tmp_path / "e.csv").read_text() == "year,v\n"

    def test_no_temp_left_behind(self, tmp_path):
        export_csv(TimeSeries("v", [1.0], [2.0]), tmp_path / "o.csv")
        assert [p.name for p in tmp_path.iterdir()] == ["o.csv"]

    def test_bad_type(self, tmp_path):
        with pytest.raises(TypeError):
            export_csv([1, 2], tmp_path / "x.csv")
