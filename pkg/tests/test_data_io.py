import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pbquantile.bootstrap_ci import ConfidenceInterval
from pbquantile.data_io import (
    InputSpec,
    SampleParseError,
    format_table,
    parse_float,
    read_sample,
    to_json,
    write_report,
    write_sample,
)
from pbquantile.simulation import CoverageReport


@pytest.fixture
def write(tmp_path):
    def _write(text, name="data.txt"):
        path = tmp_path / name
        path.write_bytes(text.encode("utf-8"))
        return str(path)
    return _write


class TestReadSample:
    def test_lines(self, write):
        got = read_sample(InputSpec(write("1\n2\n3\n")))
        assert got.values.tolist() == [1.0, 2.0, 3.0]

    def test_crlf_and_blank(self, write):
        got = read_sample(InputSpec(write("1.5\r\n\r\n-2e3\r\n  \n")))
        assert got.values.tolist() == [1.5, -2000.0]
        assert got.blank_lines == 2

    def test_csv_named_column(self, write):
        path = write("id,latency\na,10\nb,20\n", "d.csv")
        got = read_sample(InputSpec(path, "csv", "latency"))
        assert got.values.tolist() == [10.0, 20.0]

    def test_csv_index_column(self, write):
        path = write("id,latency\na,10\nb,20\n", "d.csv")
        assert read_sample(InputSpec(path, "csv", 1)).values.tolist() == [10.0, 20.0]
        path = write("a,10\nb,20\n", "e.csv")
        assert read_sample(InputSpec(path, "csv", 1, csv_header=False)).values.tolist() == [10, 20]

    def test_csv_quoted(self, write):
        path = write('name,v\n"x, y",1.25\n', "q.csv")
        assert read_sample(InputSpec(path, "csv", "v")).values.tolist() == [1.25]

    def test_bad_line_reported(self, write):
        with pytest.raises(SampleParseError) as exc:
            read_sample(InputSpec(write("1\nfoo\n3\n")))
        assert exc.value.bad_lines == [2]
        assert "line(s) 2" in str(exc.value)

    @pytest.mark.parametrize("token", ["nan", "inf", "-Infinity", "1_000", "1,5", "0x10"])
    def test_rejects_non_decimal(self, write, token):
        with pytest.raises(SampleParseError):
            read_sample(InputSpec(write(f"1\n{token}\n")))

    def test_lenient_mode(self, write):
        got = read_sample(InputSpec(write("1\nnan\n3\nx\n")), strict=False)
        assert got.values.tolist() == [1.0, 3.0]
        assert got.rejected_lines == [2, 4]

    def test_empty(self, write):
        with pytest.raises(SampleParseError):
            read_sample(InputSpec(write("\n\n")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_sample(InputSpec(str(tmp_path / "nope.txt")))

    def test_missing_column(self, write):
        with pytest.raises(SampleParseError):
            read_sample(InputSpec(write("a,b\n1,2\n", "x.csv"), "csv", "c"))

    def test_malformed_csv(self, write):
        with pytest.raises(SampleParseError):
            read_sample(InputSpec(write('v\n"1\n', "m.csv"), "csv", "v"))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            InputSpec("x", "csv")
        with pytest.raises(ValueError):
            InputSpec("x", "lines", "col")

    def test_parse_float(self):
        assert parse_float(" 12 ") == 12.0
        assert parse_float(".5") == 0.5
        assert parse_float("1e-3") == 1e-3
        assert parse_float("") is None


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=100))
def test_round_trip(tmp_path_factory, xs):
    path = tmp_path_factory.mktemp("rt") / "s.txt"
    write_sample(sorted(xs), str(path))
    back = read_sample(InputSpec(str(path))).values
    assert sorted(back.tolist()) == sorted(xs)


class TestWriteReport:
    def test_ci_json(self):
        ci = ConfidenceInterval(-0.01, 0.01, 0.95, "fast", 0.5, 0.05, 0)
        buf = io.StringIO()
        write_report(ci, "json", buf)
        d = json.loads(buf.getvalue())
        assert d == {"method": "fast", "q": 0.5, "alpha": 0.05, "lower": -0.01, "upper": 0.01,
                     "seed": 0}

    def test_byte_identical(self):
        ci = ConfidenceInterval(1 / 3, 2 / 3, 0.9, "classic", 0.25, 0.1, 12, b_used=1000)
        assert to_json(ci) == to_json(ci)
        assert to_json(ci).index('"alpha"') < to_json(ci).index('"b_used"')

    def test_coverage_table(self):
        rows = [{"q": q, "empirical_coverage": 0.95, "ci_lower": 0.94, "ci_upper": 0.96}
                for q in (0.01, 0.1, 0.25, 0.5)]
        buf = io.StringIO()
        write_report(CoverageReport(rows, {}), "table", buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == 6 and lines[0].split()[0] == "q"
        assert len({len(line) for line in lines}) == 1

    def test_file_destination(self, tmp_path):
        ci = ConfidenceInterval(0.0, 1.0, 0.95, "fast", 0.5, 0.05, 0)
        path = tmp_path / "out.json"
        write_report(ci, "json", str(path))
        assert json.loads(path.read_text())["upper"] == 1.0

    def test_unwritable(self, tmp_path):
        ci = ConfidenceInterval(0.0, 1.0, 0.95, "fast", 0.5, 0.05, 0)
        with pytest.raises(OSError):
            write_report(ci, "json", str(tmp_path / "missing" / "out.json"))

    def test_format_table(self):
        text = format_table(["a", "bb"], [[1, 2.5], [100, "x"]])
        assert text.splitlines()[1] == "---  ---"

    def test_numpy_scalars_serialize(self):
        assert json.loads(to_json({"x": np.int64(3), "y": np.float64(0.5)})) == {"x": 3, "y": 0.5}
