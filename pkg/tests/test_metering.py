import random

import pytest

from conftest import toy_params
from mibe import bench, schemes
from mibe.ceremony import court_recover, setup
from mibe.errors import MibeError
from mibe.metering import (
    OpCounter,
    PUBLISHED_COSTS,
    metered_run,
    profile_report,
    record,
    render_rows,
    render_table,
)


def _keyed(backend, seed=1):
    rng = random.Random(seed)
    params, pkg, pkpo = setup(rng, backend)
    return params, court_recover(pkg, pkpo, params, "meter@example.com"), rng


def test_encrypt_full_profile(backend):
    params, _, rng = _keyed(backend)
    _, c = metered_run("encrypt", lambda: schemes.encrypt_full(params, "meter@example.com", bytes(32), rng))
    assert c.mpe() == {"M": 1, "P": 1, "E": 1}
    assert c.h_count == 1


def test_decrypt_full_profile(backend):
    params, key, rng = _keyed(backend)
    ct = schemes.encrypt_full(params, "meter@example.com", bytes(32), rng)
    out, c = metered_run("decrypt", lambda: schemes.decrypt_full(params, key, ct))
    assert out == bytes(32)
    assert c.mpe() == {"M": 1, "P": 1}


def test_decrypt_basic_profile(backend):
    params, key, rng = _keyed(backend)
    ct = schemes.encrypt_basic(params, "meter@example.com", bytes(32), rng)
    _, c = metered_run("decrypt", lambda: schemes.decrypt_basic(params, key, ct))
    assert c.mpe() == {"P": 1}


def test_counts_invariant_over_inputs(prod):
    params, _, rng = _keyed(prod)
    seen = set()
    for i in range(5):
        _, c = metered_run("encrypt", lambda: schemes.encrypt_full(params, f"id{i}", rng.randbytes(32), rng))
        seen.add(tuple(c.mpe().items()))
    assert len(seen) == 1


def test_metering_transparent(prod):
    params, _, _ = _keyed(prod)
    z = bytes(range(32))
    plain = schemes.encrypt_full(params, "t", bytes(32), None, z=z)
    metered, _ = metered_run("encrypt", lambda: schemes.encrypt_full(params, "t", bytes(32), None, z=z))
    assert plain.to_bytes(prod) == metered.to_bytes(prod)


def test_nested_metering_rejected():
    with pytest.raises(MibeError):
        metered_run("encrypt", lambda: metered_run("decrypt", lambda: None))


def test_record_outside_phase_is_noop():
    record("M")


def test_report_statuses(prod):
    results = {s: bench.profile_scheme(s, 2, prod, random.Random(3)) for s in ("mibe", "bf")}
    rows = bench.build_report(results)
    status = {(r.scheme, r.phase): r.status for r in rows}
    assert status[("M-IBE", "encrypt")] == "MATCH"
    assert status[("M-IBE", "decrypt")] == "MATCH"
    assert status[("BF-baseline", "encrypt")] == "MATCH"
    assert status[("BF-baseline", "decrypt")] == "MATCH"
    assert status[("M-IBE", "keygen")] == "REPORT-ONLY"
    table = render_table(rows)
    assert "REPORT-ONLY" in table and "MATCH" in table
    assert render_rows(rows).splitlines()[0].split("\t")[0] == "scheme"


def test_mismatch_flagged():
    c = OpCounter("encrypt")
    c.add("M", 2)
    c.add("P")
    c.add("E")
    (row,) = profile_report([("X", c)])
    assert row.status == "MISMATCH"


def test_empty_report():
    assert profile_report([]) == []
    assert render_table([]) == ""


def test_published_rows():
    row = PUBLISHED_COSTS["M-IBE"]
    assert row["encrypt"] == {"M": 1, "P": 1, "E": 1}
    assert row["decrypt"] == {"M": 1, "P": 1}


def test_plot_written(tmp_path, prod):
    from mibe.plotting import plot_profile

    rows = bench.build_report({"mibe": bench.profile_scheme("mibe", 1, prod, random.Random(1))})
    out = plot_profile(rows, tmp_path / "p.png")
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
