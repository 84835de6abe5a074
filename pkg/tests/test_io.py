import numpy as np
import pytest

from irlslab import io
from irlslab.instances import CounterexampleParams, build_counterexample, default_z_star, nu_critical
from irlslab.solver import IrlsConfig, run_irls_cs
from irlslab.problems import CsInstance


def test_matrix_round_trip_is_exact(tmp_path, rng):
    m = rng.standard_normal((7, 5)) * np.exp(rng.uniform(-20, 20, (7, 5)))
    path = tmp_path / "m.csv"
    io.write_matrix(path, m)
    back = io.read_matrix(path)
    assert back.shape == m.shape
    assert np.array_equal(back, m)


def test_vector_round_trip_and_row_vector(tmp_path, rng):
    v = rng.standard_normal(9)
    path = tmp_path / "v.csv"
    io.write_vector(path, v)
    assert np.array_equal(io.read_vector(path), v)
    # a single-row file reads as a vector too
    (tmp_path / "row.csv").write_text("1,2,3\n")
    assert np.array_equal(io.read_vector(tmp_path / "row.csv"), [1.0, 2.0, 3.0])


def test_ragged_rows_rejected_with_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n4,5\n")
    with pytest.raises(io.CsvFormatError, match="line 2"):
        io.read_matrix(path)


def test_bad_token_rejected_with_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,x\n")
    with pytest.raises(io.CsvFormatError, match="line 2"):
        io.read_matrix(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(io.CsvFormatError):
        io.read_matrix(path)


def test_params_round_trip(tmp_path):
    path = tmp_path / "params.txt"
    io.write_params(path, {"k": 5, "gamma": 0.9987, "label": "desk"})
    back = io.read_params(path)
    assert back["k"] == "5"
    assert float(back["gamma"]) == 0.9987
    assert back["label"] == "desk"


def test_trace_csv_header_and_statuses(tmp_path, rng):
    phi = rng.standard_normal((4, 9))
    x = rng.standard_normal(9)
    inst = CsInstance(phi=phi, y=phi @ x, x_star=x)
    res = run_irls_cs(inst, IrlsConfig(max_iter=5, step_tol=0.0))
    path = tmp_path / "trace.csv"
    io.write_trace(res.trace, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n,eps,J,err1,err2,step_w,status"
    assert all(line.split(",")[-1] == "Running" for line in lines[1:-1])
    assert lines[-1].split(",")[-1] == res.status
    cols = io.read_trace(path)
    assert np.array_equal(cols["n"], res.trace.n)
    assert np.allclose(cols["J"], res.trace.J, equal_nan=True)


def test_save_counterexample_round_trip(tmp_path):
    params = CounterexampleParams(
        k=2, gamma=nu_critical(2), delta=3.0, z_star=default_z_star(2, 1)
    )
    cx = build_counterexample(params)
    out = io.save_counterexample(cx, tmp_path / "inst")
    for name in ("A.csv", "b.csv", "zstar.csv", "z0.csv", "xstar.csv", "params.txt"):
        assert (out / name).exists()
    assert np.array_equal(io.read_matrix(out / "A.csv"), cx.A)
    assert np.array_equal(io.read_vector(out / "b.csv"), cx.b)
    meta = io.read_params(out / "params.txt")
    assert float(meta["s_star"]) == cx.s_star
