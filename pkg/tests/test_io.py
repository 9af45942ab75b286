import json
import math

import numpy as np
import pytest

from spinxfer.er_unitary import N_PARAMS, PARAM_KEYS, PhiVector
from spinxfer.io import (
    FormatError,
    RunConfig,
    decode_matrix,
    encode_matrix,
    load_config,
    make_report,
    parse_config,
    polar,
    read_phi_table,
    write_phi_table,
)


def write_rows(path, rows, header=True):
    lines = ["kind,n,m,phi_radians"] if header else []
    lines += [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def all_rows(value=0.25):
    return [(k, n, m, value) for (k, n, m) in PARAM_KEYS]


def test_phi_table_roundtrip(tmp_path):
    phi = PhiVector(np.random.default_rng(1).uniform(0, 2 * np.pi, N_PARAMS))
    write_phi_table(phi, tmp_path / "phi.csv")
    assert np.array_equal(read_phi_table(tmp_path / "phi.csv").values, phi.values)


def test_phi_table_row_order_irrelevant(tmp_path):
    rows = all_rows()
    rows[3] = (rows[3][0], rows[3][1], rows[3][2], 1.5)
    a = read_phi_table(write_rows(tmp_path / "a.csv", rows))
    b = read_phi_table(write_rows(tmp_path / "b.csv", rows[::-1], header=False))
    assert np.array_equal(a.values, b.values)


@pytest.mark.parametrize("mutate, message", [
    (lambda r: r[:-1], "expected 42 angles"),
    (lambda r: r + [r[0]], "duplicate"),
    (lambda r: [(1, 2, 4, 0.1)] + r[1:], "not a valid angle key"),
    (lambda r: [(1, 2, 3)] + r[1:], "expected 4 fields"),
    (lambda r: [(1, 2, 3, "abc")] + r[1:], "could not convert"),
    (lambda r: [(1, 2, 3, "inf")] + r[1:], "finite"),
])
def test_phi_table_errors(tmp_path, mutate, message):
    path = write_rows(tmp_path / "bad.csv", mutate(all_rows()))
    with pytest.raises(FormatError, match=message):
        read_phi_table(path)


def test_packaged_tables_load(table_phi):
    assert set(table_phi) == {"zero1", "rearrange", "lincomb", "linsys"}
    assert table_phi["zero1"][(1, 2, 3)] == 0.2871
    assert table_phi["zero1"][(1, 2, 5)] == 1.2703


def test_config_defaults():
    cfg = parse_config({})
    assert cfg.chain.n_sites == 42 and cfg.time == 58.9826
    assert cfg.operation.kind == "restore" and cfg.ordering == "canonical"
    assert cfg.search.restarts == 1000 and cfg.search.residual_tol == 1e-8


def test_config_full():
    cfg = parse_config({
        "chain": {"n_sites": 10, "delta_1": 0.3, "time": 5},
        "operation": {"name": "linsys", "A": [[1, 0.5], [0, 2]]},
        "search": {"restarts": 7, "seed": 3, "ascend_top": 2},
        "ordering": "alternate",
        "io": {"report": "out.json"},
    })
    assert cfg.chain.n_sites == 10 and cfg.time == 5.0
    assert cfg.operation.A[1, 1] == 2
    assert cfg.search.ordering == "alternate" and cfg.search.restarts == 7 and cfg.search.ascend_top == 2


@pytest.mark.parametrize("doc, message", [
    ({"chain": {"n_sites": "x"}}, "chain.n_sites"),
    ({"chain": {"n_sites": 1}}, "chain"),
    ({"chain": {"time": -1}}, "chain.time"),
    ({"chain": {"foo": 1}}, "unknown keys"),
    ({"operation": {"name": "spin"}}, "operation"),
    ({"operation": {"name": "linsys", "A": [[1, 1], [1, 1]]}}, "singular"),
    ({"search": {"restarts": 0}}, "search"),
    ({"search": {"residual_tol": True}}, "search.residual_tol"),
    ({"search": {"ascend_top": -1}}, "search"),
    ({"ordering": "sideways"}, "ordering"),
    ({"bogus": 1}, "top-level"),
])
def test_config_errors(doc, message):
    with pytest.raises(FormatError, match=message):
        parse_config(doc)


def test_config_json_error_has_position(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "chain": {,\n}')
    with pytest.raises(FormatError, match=r"c.json:2:\d+"):
        load_config(p)


def test_digest_ignores_io_and_tracks_numerics():
    a = parse_config({"io": {"report": "x"}})
    b = parse_config({"io": {"report": "y"}})
    c = parse_config({"search": {"seed": 1}})
    assert a.digest() == b.digest() != c.digest()


def test_report_is_finite_json():
    body = {"z": 0.3 + 0.4j, "bad": float("nan"), "arr": np.arange(3.0), "flag": np.bool_(True)}
    rep = make_report("x", RunConfig(), body)
    text = json.dumps(rep, allow_nan=False)
    back = json.loads(text)
    assert back["z"]["abs"] == 0.5
    assert back["bad"] is None
    assert back["provenance"]["config_digest"] == RunConfig().digest()


def test_polar_and_matrix_codec():
    p = polar(-1j)
    assert p["abs"] == 1 and math.isclose(p["phase"], -math.pi / 2, abs_tol=1e-6)
    m = np.arange(16).reshape(4, 4) * (1 + 2j)
    assert np.array_equal(decode_matrix(encode_matrix(m)), m)
    with pytest.raises(FormatError):
        decode_matrix([[[1, 0]]])
