import json

import numpy as np
import pytest

from dpmarkov import load_faithful
from dpmarkov.draws import PosteriorDraws, load_draws, read_columns, write_columns
from dpmarkov.io import SeriesFormatError, dumps_json, format_series, parse_series, read_series

from conftest import random_mixture


class TestParseSeries:
    def test_single_column_with_and_without_header(self):
        np.testing.assert_array_equal(parse_series("1\n2.5\n-3\n"), [1.0, 2.5, -3.0])
        np.testing.assert_array_equal(parse_series("z\n1\n2\n"), [1.0, 2.0])

    def test_comments_and_trailing_blank_lines(self):
        np.testing.assert_array_equal(parse_series("# note\n1\n2\n\n\n"), [1.0, 2.0])

    def test_csv_column_by_name_and_index(self):
        text = "a,b\n1,10\n2,20\n"
        np.testing.assert_array_equal(parse_series(text, "b"), [10.0, 20.0])
        np.testing.assert_array_equal(parse_series(text, 0), [1.0, 2.0])
        np.testing.assert_array_equal(parse_series(text, "1"), [10.0, 20.0])

    def test_several_columns_need_a_choice(self):
        with pytest.raises(SeriesFormatError, match="2 columns"):
            parse_series("a,b\n1,2\n")

    @pytest.mark.parametrize("text, where", [
        ("1\n\n3\n", "line 2: blank"),
        ("1\nnan\n3\n", "line 2: non-finite"),
        ("1\n2\nx\n", "line 3: not a number"),
        ("a,b\n1,2\n3\n", "line 3: expected 2 fields"),
    ])
    def test_errors_name_the_line(self, text, where):
        with pytest.raises(SeriesFormatError, match=where):
            parse_series(text, 0)

    def test_all_problems_are_reported(self):
        with pytest.raises(SeriesFormatError) as exc:
            parse_series("1\nx\ny\n4\n")
        assert "line 2" in str(exc.value) and "line 3" in str(exc.value)

    def test_bad_column_choice(self):
        with pytest.raises(SeriesFormatError):
            parse_series("a,b\n1,2\n", "c")
        with pytest.raises(SeriesFormatError):
            parse_series("a,b\n1,2\n", 5)

    def test_empty_input(self):
        with pytest.raises(SeriesFormatError, match="no data"):
            parse_series("# only a comment\n")


def test_series_round_trip_is_exact(tmp_path):
    z = np.random.default_rng(0).normal(size=50) * 1e3
    for header in ("z", None):
        path = tmp_path / "s.txt"
        path.write_text(format_series(z, header))
        np.testing.assert_array_equal(read_series(path), z)


def test_bundled_faithful():
    z = load_faithful()
    assert z.size == 272 and z[:3].tolist() == [79.0, 54.0, 74.0]
    assert load_faithful("eruptions").size == 272
    with pytest.raises(ValueError):
        load_faithful("nope")


def test_json_is_deterministic_and_handles_numpy():
    obj = {"b": np.float64(0.1), "a": np.arange(3), "c": np.int64(2)}
    text = dumps_json(obj)
    assert text == dumps_json(dict(reversed(list(obj.items()))))
    assert json.loads(text) == {"a": [0, 1, 2], "b": 0.1, "c": 2}


def test_columns_round_trip():
    m = np.random.default_rng(1).normal(size=(4, 3))
    names, back, meta = read_columns(write_columns(["a", "b", "c"], m, {"k": 1}))
    assert names == ["a", "b", "c"] and meta == {"k": 1}
    np.testing.assert_array_equal(back, m)


class TestDrawsExport:
    @pytest.fixture
    def draws(self):
        rng = np.random.default_rng(2)
        return PosteriorDraws.from_states([random_mixture(rng, 3) for _ in range(5)],
                                          {"series": {"n": 10}})

    def test_round_trip_is_exact(self, draws):
        back = load_draws(draws.to_text())
        for name in ("mu_x", "mu_y", "beta", "delta_x", "delta_y", "zeta", "alpha", "psi"):
            np.testing.assert_array_equal(getattr(back, name), getattr(draws, name))
        assert back.meta["series"] == {"n": 10}
        assert back.to_text() == draws.to_text()

    def test_header_names(self, draws):
        header = draws.to_text().splitlines()[1].split()
        assert header[:2] == ["iteration", "alpha"]
        assert header[-1] == "zeta_2" and "delta_y_3" in header

    def test_unknown_model_tag(self, draws):
        text = draws.to_text().replace('"model": "general"', '"model": "other"')
        with pytest.raises(ValueError, match="unknown model"):
            load_draws(text)

    def test_state_access(self, draws):
        s = draws[1]
        np.testing.assert_array_equal(s.mu_x, draws.mu_x[1])
        np.testing.assert_allclose(draws.weights.sum(axis=1), 1.0)
        assert len(draws.subset([0, 2])) == 2

    def test_empty_draws_rejected(self):
        with pytest.raises(ValueError):
            PosteriorDraws(np.empty((0, 2)), np.empty((0, 2)), np.empty((0, 2)), np.empty((0, 2)),
                           np.empty((0, 2)), np.empty((0, 1)), [], np.empty((0, 10)), [])
