import json
from datetime import datetime, timezone

import numpy as np
import pytest

from censored_smith import cli
from censored_smith.distributions import GevMargin
from censored_smith.errors import DataError
from censored_smith.io import (
    EPOCH,
    RawRecord,
    WindowSpec,
    format_time,
    haversine_km,
    monthly_blocks,
    parse_time,
    read_timeseries,
    window_extract,
)
from censored_smith.rng import spawn
from censored_smith.simulation import SamplingScheme, make_times, simulate_smith
from censored_smith.synthetic import december_records, track_records, write_records


def _days(*args):
    return (datetime(*args, tzinfo=timezone.utc) - EPOCH).total_seconds() / 86400.0


def _write(path, text):
    path.write_text(text)
    return path


# --------------------------------------------------------------------------
# reading


def test_read_three_rows(tmp_path):
    p = _write(tmp_path / "a.csv", "time,value\n2000-01-01T00:00:00Z,1.5\n2000-01-02T00:00:00,2.5\n2000-01-03,3.5\n")
    recs = read_timeseries(p)
    assert [r.value for r in recs] == [1.5, 2.5, 3.5]
    assert recs[0].time == _days(2000, 1, 1)
    assert np.all(np.diff([r.time for r in recs]) == 1.0)


def test_read_bad_value_names_line(tmp_path):
    p = _write(tmp_path / "a.csv", "time,value\n2000-01-01,1.0\n2000-01-02,abc\n")
    with pytest.raises(DataError, match="line 3"):
        read_timeseries(p)


def test_read_spatial(tmp_path):
    p = _write(tmp_path / "a.csv", "time,value,lat,lon\n2000-01-01,1.0,43.5,-8.25\n")
    (r,) = read_timeseries(p)
    assert (r.lat, r.lon) == (43.5, -8.25)
    assert r.has_position


def test_read_unsorted_and_duplicates(tmp_path):
    p = _write(tmp_path / "a.csv", "time,value\n2.0,1.0\n1.0,2.0\n1.0,3.0\n")
    with pytest.warns(UserWarning) as rec:
        recs = read_timeseries(p)
    assert [r.time for r in recs] == [1.0, 1.0, 2.0]
    assert [r.value for r in recs] == [2.0, 3.0, 1.0]
    messages = " ".join(str(w.message) for w in rec)
    assert "sorted" in messages and "duplicate" in messages


def test_read_errors(tmp_path):
    with pytest.raises(DataError):
        read_timeseries(tmp_path / "missing.csv")
    with pytest.raises(DataError):
        read_timeseries(_write(tmp_path / "h.csv", "when,value\n1,2\n"))
    with pytest.raises(DataError, match="line 2"):
        read_timeseries(_write(tmp_path / "l.csv", "time,value,lat,lon\n1,2,95,0\n"))


def test_time_formats():
    assert parse_time("1970-01-02T12:00:00Z") == 1.5
    assert parse_time("1970-01-02T13:00:00+01:00") == 1.5
    assert parse_time("12.25") == 12.25
    assert format_time(1.5) == "1970-01-02T12:00:00Z"


def test_record_validation():
    with pytest.raises(DataError):
        RawRecord(0.0, float("nan"))
    with pytest.raises(DataError):
        RawRecord(0.0, 1.0, 10.0, 180.0)


# --------------------------------------------------------------------------
# monthly blocks


def test_two_decembers_of_daily_data():
    recs = [RawRecord(_days(y, 12, 1) + d, float(d)) for y in (2000, 2001) for d in range(31)]
    recs.append(RawRecord(_days(2001, 1, 5), 9.0))
    recs.sort(key=lambda r: r.time)
    series, years = monthly_blocks(recs, 12)
    assert years == [2000, 2001]
    assert len(series) == 62
    np.testing.assert_array_equal(np.bincount(series.block_ids), [31, 31])
    np.testing.assert_array_equal(series.times[:31], np.arange(31.0))


def test_month_without_records():
    recs = [RawRecord(_days(2000, 6, d), 1.0) for d in range(1, 10)]
    with pytest.warns(UserWarning):
        series, years = monthly_blocks(recs, 12)
    assert len(series) == 0 and years == []
    with pytest.raises(DataError):
        monthly_blocks(recs, 13)


def test_twenty_one_december_blocks():
    recs = december_records(seed=1)
    series, years = monthly_blocks(recs, 12)
    assert years == list(range(1990, 2011))
    assert np.unique(series.block_ids).size == 21
    assert np.all((series.times >= 0) & (series.times < 31))


# --------------------------------------------------------------------------
# windows


def _track(t0, lat0, lat1, lon, n=50):
    lats = np.linspace(lat0, lat1, n)
    return [RawRecord(t0 + k / 1440.0, 1.0 + k, float(la), lon) for k, la in enumerate(lats)]


def test_single_track_through_centre():
    recs = _track(0.0, 40.0, 46.0, -8.0, n=61)
    out = window_extract(recs, WindowSpec(43.0, -8.0))
    assert len(out) == 1
    assert out[0].lat == pytest.approx(43.0)


def test_two_tracks_are_two_records():
    recs = _track(0.0, 40.0, 46.0, -8.0) + _track(100 / 1440.0, 40.0, 46.0, -7.5)
    out = window_extract(recs, WindowSpec(43.0, -8.0, track_gap_minutes=30))
    assert len(out) == 2
    assert out[0].time < out[1].time


def test_track_outside_box():
    recs = _track(0.0, 40.0, 46.0, 0.0)
    with pytest.warns(UserWarning):
        assert window_extract(recs, WindowSpec(43.0, -8.0)) == []


def test_equidistant_tie_keeps_first():
    recs = [RawRecord(0.0, 1.0, 43.5, -8.0), RawRecord(1 / 1440, 2.0, 42.5, -8.0)]
    # both are half a degree of latitude from the centre
    assert haversine_km(43.5, -8, 43, -8) == pytest.approx(haversine_km(42.5, -8, 43, -8))
    assert window_extract(recs, WindowSpec(43.0, -8.0))[0].value == 1.0


def test_window_needs_positions():
    with pytest.raises(DataError):
        window_extract([RawRecord(0.0, 1.0)], WindowSpec(0.0, 0.0))


def test_window_count_bounded_by_segments():
    recs = track_records(n_days=30, seed=2)
    out = window_extract(recs, WindowSpec(43.0, -7.0))
    times = np.array([r.time for r in recs])
    n_segments = 1 + np.count_nonzero(np.diff(times) > 30 / 1440)
    assert 0 < len(out) <= n_segments


# --------------------------------------------------------------------------
# CLI


def _run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _strip(doc):
    doc = dict(doc)
    doc.pop("timestamp")
    return doc


def test_simulate_round_trip(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    code, out, _ = _run(["simulate", "--n", 400, "--nu", 0.5, "--xi", 0.1, "--seed", 3, "--csv", csv], capsys)
    assert code == 0
    s_times, s_values = spawn(3, 2)
    times = make_times(SamplingScheme.regular(1.0, n=400), s_times)
    ref = simulate_smith(times, GevMargin(0.0, 1.0, 0.1), 0.5, s_values)
    data = np.loadtxt(csv, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 1], ref.values, rtol=1e-12, atol=0)
    recs = read_timeseries(csv)
    np.testing.assert_allclose([r.value for r in recs], ref.values, rtol=1e-12, atol=0)


def test_fit_recovers_known_parameters(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--n", 3000, "--nu", 0.5, "--xi", 0.1, "--seed", 4, "--csv", csv], capsys)
    code, out, _ = _run(["fit", "-i", csv, "--quantile", 0.7], capsys)
    assert code == 0
    theta = json.loads(out)["result"]["fit"]["theta"]
    assert theta["mu"] == pytest.approx(0.0, abs=0.15)
    assert theta["sigma"] == pytest.approx(1.0, abs=0.15)
    assert theta["xi"] == pytest.approx(0.1, abs=0.15)
    assert theta["nu"] == pytest.approx(0.5, abs=0.25)


def test_fit_outputs_scan_and_qq(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--n", 500, "--nu", 0.5, "--seed", 5, "--csv", csv], capsys)
    scan = tmp_path / "scan.csv"
    code, out, _ = _run(["fit", "-i", csv, "--quantile", 0.7, "--scan", "0.6,0.7,0.8", "--csv", scan], capsys)
    assert code == 0
    assert scan.read_text().splitlines()[0] == "u,mu,sigma,xi,nu"
    assert len(scan.read_text().splitlines()) == 4
    qq = tmp_path / "qq.csv"
    assert _run(["fit", "-i", csv, "--threshold", 0.5, "--csv", qq], capsys)[0] == 0
    assert qq.read_text().splitlines()[0] == "p,empirical,model"


def test_return_level_from_fit_json(tmp_path, capsys):
    csv, fj = tmp_path / "s.csv", tmp_path / "fit.json"
    _run(["simulate", "--n", 500, "--nu", 0.5, "--seed", 6, "--csv", csv], capsys)
    _run(["fit", "-i", csv, "--quantile", 0.7, "-o", fj], capsys)
    code, out, _ = _run(["return-level", "--fit-json", fj, "--T", "10,50", "--sim-years", 100], capsys)
    assert code == 0
    levels = json.loads(out)["result"]["levels"]
    assert levels["q10"] <= levels["q50"]


def test_pot_command(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--model", "iid", "--n", 3650, "--seed", 7, "--csv", csv], capsys)
    code, out, _ = _run(["pot", "-i", csv, "--quantile", 0.95, "--T", "10,100"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    assert res["pot"]["n_below"] + res["pot"]["n_exceed"] == res["pot"]["n"]
    assert res["levels"]["q10"] < res["levels"]["q100"]


def test_grid_command(tmp_path, capsys):
    tr, out_csv = tmp_path / "tr.csv", tmp_path / "grid.csv"
    write_records(tr, track_records(n_days=365, seed=3))
    code, out, err = _run(
        ["grid", "-i", tr, "--lat", "42,44", "--lon=-8", "--sim-years", 50, "--csv", out_csv], capsys
    )
    assert code == 0, err
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "lat,lon,q20"
    assert len(lines) == 3
    assert json.loads(out)["result"]["fix_xi"] == 0.0


def test_bootstrap_command_emits_table(tmp_path, capsys):
    path = tmp_path / "dec.csv"
    write_records(path, december_records(n_years=6, seed=8))
    code, out, err = _run(
        ["bootstrap", "-i", path, "--month", 12, "--quantile", 0.7, "--B", 4, "--T", "10,20", "--sim-years", 40, "--xi-mode", "free"],
        capsys,
    )
    assert code == 0, err
    table = json.loads(out)["result"]["bootstrap"]["free"]["table"]
    assert list(table) == ["mu", "sigma", "xi", "nu", "q10", "q20"]
    assert set(table["mu"]) == {"estimate", "lo", "hi"}


def test_validate_command_small(capsys):
    code, out, err = _run(["validate", "--model", "iid", "--reps", 2, "--years", 2, "--sim-years", 100, "--T", 10], capsys)
    assert code == 0, err
    rows = json.loads(out)["result"]["rows"]
    assert [r["method"] for r in rows] == ["MPL1E", "MMLE", "POT"]


def test_determinism_byte_identical(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--n", 300, "--nu", 0.5, "--seed", 9, "--csv", csv], capsys)
    outs = []
    for k in range(2):
        o = tmp_path / f"r{k}.json"
        assert _run(["fit", "-i", csv, "--quantile", 0.7, "-o", o], capsys)[0] == 0
        outs.append(json.loads(o.read_text()))
    assert json.dumps(_strip(outs[0])) == json.dumps(_strip(outs[1]))


def test_config_file_matches_flags(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--n", 300, "--nu", 0.5, "--seed", 10, "--csv", csv], capsys)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": str(csv), "quantile": 0.7, "estimator": "mmle"}))
    a = json.loads(_run(["fit", "--config", cfg], capsys)[1])
    b = json.loads(_run(["fit", "-i", csv, "--quantile", 0.7, "--estimator", "mmle"], capsys)[1])
    assert a["config_hash"] == b["config_hash"]
    assert a["result"] == b["result"]
    # flags on the command line override the config file
    c = json.loads(_run(["fit", "--config", cfg, "--estimator", "mple"], capsys)[1])
    assert c["result"]["fit"]["estimator"] == "MPL1E"


def test_envelope_fields(tmp_path, capsys):
    code, out, _ = _run(["simulate", "--n", 10, "--seed", 11], capsys)
    doc = json.loads(out)
    assert set(doc) == {"command", "config", "config_hash", "seed", "versions", "timestamp", "result"}
    assert doc["seed"] == 11
    assert len(doc["config_hash"]) == 64


@pytest.mark.parametrize(
    "argv,code",
    [
        (["fit", "--quantile", 0.9], 2),
        (["simulate", "--n", 10, "--sigma", -1], 2),
        (["simulate"], 2),
        (["fit", "--bogus"], 2),
        (["simulate", "--n", 10, "--jobs", 0], 2),
    ],
)
def test_config_errors_exit_2(argv, code, capsys):
    got, out, err = _run(argv, capsys)
    assert got == code
    assert out == ""
    assert json.loads(err)["exit_code"] == code


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"thresh": 1.0}))
    code, _, err = _run(["fit", "--config", cfg], capsys)
    assert code == 2
    assert "thresh" in json.loads(err)["message"]


def test_data_error_exit_3(tmp_path, capsys):
    p = _write(tmp_path / "bad.csv", "time,value\n1,abc\n")
    code, _, err = _run(["fit", "-i", p, "--threshold", 0.0], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "DataError"


def test_numerical_error_exit_4(tmp_path, capsys):
    csv = tmp_path / "s.csv"
    _run(["simulate", "--n", 100, "--seed", 12, "--csv", csv], capsys)
    code, _, err = _run(["fit", "-i", csv, "--threshold", 1e6], capsys)
    assert code == 4
    assert json.loads(err)["error"] == "NonIdentifiableError"


def test_jobs_environment_default(monkeypatch):
    monkeypatch.setenv(cli.JOBS_ENV, "3")
    assert cli.parse_args(["simulate", "--n", "5"]).jobs == 3
