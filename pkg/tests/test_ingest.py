import datetime as dt
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nbrepro.ingest import (
    CasePanel,
    ConfigError,
    DateGapError,
    DateRangeError,
    DuplicateRowError,
    GofRejection,
    GofSample,
    NegativeCountError,
    PanelParseError,
    PipelineConfig,
    load_config,
    load_panel,
    moving_average,
    rolling_sums,
    select_gof_districts,
    weekly_sum,
    write_panel,
)

from conftest import make_panel

D0 = dt.date(2020, 4, 1)


def write_rows(tmp_path, rows, name="panel.csv", header="date,district_id,cases"):
    path = tmp_path / name
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_three_row_file(tmp_path):
    path = write_rows(tmp_path, ["2020-04-01,A,3", "2020-04-02,A,0", "2020-04-03,A,5"])
    panel = load_panel(path)
    assert panel.n_districts == 1 and panel.n_dates == 3
    assert panel.dates == (D0, D0 + dt.timedelta(1), D0 + dt.timedelta(2))
    assert panel.national.tolist() == [3, 0, 5]


def test_duplicate_row_names_it(tmp_path):
    path = write_rows(tmp_path, ["2020-04-01,A,3", "2020-04-02,A,1", "2020-04-01,A,4"])
    with pytest.raises(DuplicateRowError, match="2020-04-01.*A"):
        load_panel(path)


def test_parse_error_has_line_number(tmp_path):
    path = write_rows(tmp_path, ["2020-04-01,A,3", "2020-04-02,A,x"])
    with pytest.raises(PanelParseError) as exc:
        load_panel(path)
    assert exc.value.line == 3
    path = write_rows(tmp_path, ["2020-13-01,A,3"], name="b.csv")
    with pytest.raises(PanelParseError, match=":2:"):
        load_panel(path)


def test_bad_header(tmp_path):
    with pytest.raises(PanelParseError):
        load_panel(write_rows(tmp_path, ["2020-04-01,A,3"], header="day,region,n"))


def test_negative_count(tmp_path):
    with pytest.raises(NegativeCountError):
        load_panel(write_rows(tmp_path, ["2020-04-01,A,-1"]))


def test_date_gap_and_fill(tmp_path):
    path = write_rows(tmp_path, ["2020-04-01,A,3", "2020-04-03,A,5"])
    with pytest.raises(DateGapError, match="2020-04-02"):
        load_panel(path)
    panel = load_panel(path, PipelineConfig(fill_missing=True))
    assert panel.counts[:, 0].tolist() == [3, 0, 5]


def test_missing_cell(tmp_path):
    path = write_rows(tmp_path, ["2020-04-01,A,3", "2020-04-01,B,1", "2020-04-02,A,5"])
    with pytest.raises(DateGapError, match="B"):
        load_panel(path)
    panel = load_panel(path, PipelineConfig(fill_missing=True))
    assert panel.counts.tolist() == [[3, 1], [5, 0]]


def test_national_equals_row_sums(tmp_path):
    rng = np.random.default_rng(3)
    counts = rng.poisson(12, size=(20, 401))
    panel = make_panel(counts)
    path = tmp_path / "big.csv"
    write_panel(panel, path)
    loaded = load_panel(path)
    assert loaded.n_districts == 401
    # recompute from the raw file, independent of the panel code
    by_date: dict[str, int] = {}
    for line in path.read_text().splitlines()[1:]:
        d, _, c = line.split(",")
        by_date[d] = by_date.get(d, 0) + int(c)
    assert loaded.national.tolist() == [by_date[d.isoformat()] for d in loaded.dates]


def test_row_order_irrelevant(tmp_path):
    rows = [f"2020-04-0{d},{k},{d * 3 + len(k)}" for d in range(1, 4) for k in ("B", "A", "CC")]
    a = load_panel(write_rows(tmp_path, rows, "a.csv"))
    random.Random(0).shuffle(rows)
    b = load_panel(write_rows(tmp_path, rows, "b.csv"))
    assert a.districts == ("A", "B", "CC") == b.districts
    assert np.array_equal(a.counts, b.counts)


def test_include_exclude(tmp_path):
    rows = [f"2020-04-01,{k},1" for k in "ABC"]
    path = write_rows(tmp_path, rows)
    assert load_panel(path, PipelineConfig(include=("A", "C"))).districts == ("A", "C")
    assert load_panel(path, PipelineConfig(exclude=("B",))).districts == ("A", "C")


def test_panel_is_immutable():
    panel = make_panel([[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        panel.counts[0, 0] = 9


def test_panel_validation():
    with pytest.raises(DateGapError):
        CasePanel((D0, D0 + dt.timedelta(2)), ("A",), np.array([[1], [2]]))
    with pytest.raises(NegativeCountError):
        make_panel([[1], [-2]])


def test_weekly_sum_examples():
    assert weekly_sum(make_panel([4] * 10), D0 + dt.timedelta(9)) == 28
    panel = make_panel([1, 2, 3, 4, 5, 6, 7])
    assert weekly_sum(panel, D0 + dt.timedelta(6)) == 28
    assert weekly_sum(panel, "2020-04-07", district="K000") == 28
    with pytest.raises(DateRangeError):
        weekly_sum(panel, D0 + dt.timedelta(5))
    with pytest.raises(DateRangeError):
        weekly_sum(panel, D0 + dt.timedelta(30))


panels = arrays(np.int64, st.tuples(st.integers(8, 25), st.integers(1, 6)), elements=st.integers(0, 500))


@given(panels)
def test_weekly_sum_translation(counts):
    panel = make_panel(counts)
    for i in range(7, panel.n_dates):
        diff = weekly_sum(panel, i) - weekly_sum(panel, i - 1)
        assert diff == panel.national[i] - panel.national[i - 7]


@given(panels)
def test_national_weekly_is_sum_of_districts(counts):
    panel = make_panel(counts)
    for i in range(6, panel.n_dates):
        assert weekly_sum(panel, i) == sum(weekly_sum(panel, i, k) for k in panel.districts)


@given(panels)
def test_rolling_sums_match_weekly_sum(counts):
    panel = make_panel(counts)
    W = rolling_sums(panel.counts, 7)
    assert np.all(np.isnan(W[:6]))
    for i in range(6, panel.n_dates):
        assert W[i].tolist() == [weekly_sum(panel, i, k) for k in panel.districts]


def test_moving_average_examples():
    out = moving_average([3.5] * 10, 7)
    assert np.all(np.isnan(out[:6])) and np.all(out[6:] == 3.5)
    assert moving_average([0, 0, 0, 0, 0, 0, 7], 7)[6] == 1.0
    nan_in = moving_average([1, 1, np.nan, 1, 1], 2)
    assert np.isnan(nan_in[2]) and np.isnan(nan_in[3]) and nan_in[4] == 1.0
    with pytest.raises(ConfigError):
        moving_average([1.0], 0)


@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(1, 20), st.integers(1, 20), st.integers(1, 9))
def test_moving_average_step_monotone(lo, hi, n_lo, n_hi, window):
    series = [lo] * n_lo + [hi] * n_hi
    out = moving_average(series, window)[window - 1 :]
    d = np.diff(out)
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    if hi >= lo:
        assert np.all(d >= -tol)
    else:
        assert np.all(d <= tol)
    assert np.all(out >= min(lo, hi) - tol) and np.all(out <= max(lo, hi) + tol)


def test_gof_selection_examples():
    cfg = PipelineConfig(gof_min_districts=3)
    sel = select_gof_districts(make_panel(np.full((12, 5), 20)), 11, cfg)
    assert isinstance(sel, GofSample)
    assert sel.size == 5 and sel.values.tolist() == [140] * 5
    rej = select_gof_districts(make_panel(np.full((12, 5), 5)), 11, cfg)
    assert isinstance(rej, GofRejection) and rej.count == 0


def test_gof_selection_band_and_lags():
    # district 0: lagged mean 15 (edge, in); 1: 25 (edge, in); 2: 26 (out); 3: 14 (out)
    lagged = np.array([15, 25, 26, 14])
    counts = np.tile(lagged, (11, 1))
    counts[7:] = 100  # the last four days never enter the lagged window
    cfg = PipelineConfig(gof_min_districts=2)
    sel = select_gof_districts(make_panel(counts), 10, cfg)
    assert sel.districts == ("K000", "K001")
    assert sel.values.tolist() == [3 * 15 + 400, 3 * 25 + 400]
    with pytest.raises(DateRangeError):
        select_gof_districts(make_panel(counts), 9, cfg)
    rej = select_gof_districts(make_panel(counts), 10, PipelineConfig(gof_min_districts=3))
    assert rej.count == 2


def test_gof_selection_order_invariant():
    rng = np.random.default_rng(1)
    counts = rng.poisson(rng.uniform(5, 35, size=40), size=(15, 40))
    names = [f"K{j:03d}" for j in range(40)]
    perm = rng.permutation(40)
    cfg = PipelineConfig(gof_min_districts=2)
    a = select_gof_districts(make_panel(counts, districts=names), 14, cfg)
    b = select_gof_districts(make_panel(counts[:, perm], districts=[names[j] for j in perm]), 14, cfg)
    assert dict(zip(a.districts, a.values.tolist())) == dict(zip(b.districts, b.values.tolist()))


def test_config_defaults_and_validation():
    cfg = PipelineConfig()
    assert (cfg.tau, cfg.gen_time, cfg.window) == (7, 4, 7)
    assert cfg.gof_band == (15.0, 25.0) and cfg.gof_min_districts == 75
    assert cfg.effective_lag == 14
    for bad in ({"tau": -1}, {"gen_time": 0}, {"window": 0}, {"gof_band": (25, 15)}, {"gof_min_districts": 1}):
        with pytest.raises(ConfigError):
            PipelineConfig(**bad)


def test_config_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\ntau = 6\ngen-time=5\np0_grid = 0.1, 0.3\ngof_band = 10:30\nfill_missing = yes\n")
    cfg = load_config(path)
    assert (cfg.tau, cfg.gen_time, cfg.window) == (6, 5, 7)
    assert cfg.p0_grid == (0.1, 0.3) and cfg.gof_band == (10.0, 30.0) and cfg.fill_missing
    path.write_text("taux = 3\n")
    with pytest.raises(ConfigError, match="taux"):
        load_config(path)
    path.write_text("tau = seven\n")
    with pytest.raises(ConfigError):
        load_config(path)
