import contextlib
import io
import json

import numpy as np
import pytest

from dyadlab.cli import main
from dyadlab.grid import make_grid_function, save_signal


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def haar_path(tmp_path):
    p = tmp_path / "haar.json"
    save_signal(make_grid_function([1.0, -1.0], -1), p)
    return str(p)


@pytest.fixture
def const_path(tmp_path):
    p = tmp_path / "const.json"
    save_signal(make_grid_function(np.ones(8), -3), p)
    return str(p)


@pytest.fixture
def grid2d_path(tmp_path):
    p = tmp_path / "f2.json"
    save_signal(make_grid_function(np.arange(16.0).reshape(4, 4), -2), p)
    return str(p)


def test_sample_lattice_deterministic():
    c1, o1, _ = run("sample-lattice", "--seed", "7", "--m", "-3", "--K", "2")
    c2, o2, _ = run("sample-lattice", "--seed", "7", "--m", "-3", "--K", "2")
    assert c1 == c2 == 0
    r1, r2 = json.loads(o1), json.loads(o2)
    assert r1["results"] == r2["results"]
    assert r1["command"] == "sample-lattice"
    assert set(r1) == {"command", "seed", "config", "results", "wall_time_s"}


def test_sample_lattice_two_axes():
    c, o, _ = run("sample-lattice", "--seed", "7", "--m", "-3", "--K", "2", "--dims", "2")
    assert c == 0
    assert len(json.loads(o)["results"]["axes"]) == 2


def test_bad_scale_window_is_data_error():
    c, _, e = run("sample-lattice", "--seed", "1", "--K", "2", "--m", "2")
    assert c == 3
    assert e.strip()


def test_missing_flags_usage_error():
    c, _, _ = run("sample-lattice", "--seed", "1")
    assert c == 2


def test_unknown_command_usage_error():
    c, _, _ = run("no-such-command")
    assert c == 2


def test_h1_haar_dyadic_fixed_is_one(haar_path):
    c, o, e = run("h1-norm", haar_path, "--method", "dyadic-fixed", "--K", "0")
    assert c == 0, e
    assert json.loads(o)["results"]["norm"] == 1.0


def test_h1_constant_on_aligned_lattice_is_zero(const_path):
    c, o, _ = run("h1-norm", const_path, "--method", "dyadic-fixed", "--K", "0")
    assert json.loads(o)["results"]["norm"] == 0.0


def test_h1_mc_agrees_with_exact(haar_path):
    _, o, _ = run("h1-norm", haar_path, "--method", "randomized-exact", "--K", "2")
    exact = json.loads(o)["results"]["norm"]
    _, o, _ = run(
        "h1-norm", haar_path, "--method", "randomized-mc", "--K", "2",
        "--samples", "4096", "--seed", "11",
    )
    res = json.loads(o)["results"]
    assert abs(res["norm"] - exact) < 3 * max(res["norm_se"], 1e-12)
    # bit-identical on repeat
    _, o2, _ = run(
        "h1-norm", haar_path, "--method", "randomized-mc", "--K", "2",
        "--samples", "4096", "--seed", "11",
    )
    assert json.loads(o2)["results"] == res


def test_h1_lusin_modes(haar_path, grid2d_path):
    c, o, e = run("h1-norm", haar_path, "--method", "lusin")
    assert c == 0, e
    r = json.loads(o)["results"]
    assert r["norm"] > 0 and r["tail_bound"] > 0
    assert "quadrature" in r
    c, o, e = run("h1-norm", grid2d_path, "--method", "lusin")
    assert c == 0, e
    assert json.loads(o)["results"]["tail_bound"] is None


def test_square_function_2d_sampled(grid2d_path):
    c, o, e = run("square-function", grid2d_path, "--seed", "3", "--params", "1", "--K", "0")
    assert c == 0, e
    r = json.loads(o)["results"]
    assert r["method"] == "plain"
    assert len(r["lattice"]) == 2
    vals = np.asarray(r["square_function"]["values"])
    assert vals.ndim == 1 and np.all(np.isfinite(vals))


def test_bmo_modes_ordered(haar_path):
    _, o, _ = run("bmo-norm", haar_path)
    full = json.loads(o)["results"]["report"]["norm"]
    _, o, _ = run("bmo-norm", haar_path, "--method", "dyadic", "--K", "1")
    dyadic = json.loads(o)["results"]["report"]["norm"]
    assert dyadic <= full + 1e-15


def test_kernel_check_slopes():
    c, o, e = run("kernel-check")
    assert c == 0, e
    r = json.loads(o)["results"]
    assert abs(r["size_fit"]["slope"] + 1) < 0.15
    assert abs(r["smoothness_dx_fit"]["slope"] - 1) < 0.2
    assert abs(r["smoothness_dy_fit"]["slope"] + 3) < 0.3


def test_seqspace_check_identities():
    c, o, e = run("seqspace-check")
    assert c == 0, e
    r = json.loads(o)["results"]
    assert abs(r["tl_norm_a"] - r["averaged_square_l1"]) < 1e-12
    assert abs(r["tl_norm_b"] - r["plain_square_l1"]) < 1e-12
    assert r["chain_max_violation"] <= 1e-12
    assert r["ad_constant_identity"] == 1.0


def test_equivalence_experiment_csv():
    c, o, e = run("equivalence-experiment", "--seed", "5")
    assert c == 0, e
    lines = o.strip().splitlines()
    assert lines[0] == "kind,atom,base,translate,dilate,mesh_exponent,method,value"
    result_rows = [l for l in lines if l.startswith("result,")]
    assert len(result_rows) == 48  # 24 atoms x 2 methods
    summary = {
        l.split(",")[6]: float(l.split(",")[7])
        for l in lines
        if l.startswith("summary,")
    }
    assert summary["ratio_spread"] <= 10.0
    assert summary["translate_spread_max"] < 1e-10


def test_equivalence_experiment_json():
    c, o, _ = run("equivalence-experiment", "--seed", "5", "--format", "json")
    assert c == 0
    assert len(json.loads(o)["results"]["rows"]) == 48


def test_out_file_writing(haar_path, tmp_path):
    outp = tmp_path / "rep.json"
    c, o, _ = run(
        "h1-norm", haar_path, "--method", "dyadic-fixed", "--K", "0", "--out", str(outp)
    )
    assert c == 0 and o == ""
    assert json.loads(outp.read_text())["results"]["norm"] == 1.0


def test_missing_file_is_data_error(tmp_path):
    c, _, e = run("h1-norm", str(tmp_path / "nope.json"), "--method", "lusin")
    assert c == 3


def test_malformed_json_reports_byte_offset(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"values": [1,')
    c, _, e = run("h1-norm", str(bad), "--method", "lusin")
    assert c == 3
    assert "byte" in e


def test_oversized_window_is_size_error():
    c, _, e = run("sample-lattice", "--seed", "1", "--m", "-40", "--K", "0")
    assert c == 4


def test_flat_csv_format(haar_path):
    _, o, _ = run(
        "h1-norm", haar_path, "--method", "dyadic-fixed", "--K", "0", "--format", "csv"
    )
    lines = o.splitlines()
    assert lines[0] == "key,value"
    assert any(l.startswith("norm,") for l in lines)
