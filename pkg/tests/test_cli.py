import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devbound.cli import COLUMNS, ReportRow, parse_report, render, run
from devbound.errors import ValidationError


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text, fmt="csv"):
    return parse_report(text, fmt)


def test_phi_example(capsys):
    code, out, _ = call(capsys, "phi", "--lnJp1", "4", "--q", "0.25", "--n", "100")
    assert code == 0
    (row,) = rows_of(out)
    assert row.value == pytest.approx(0.1, rel=1e-14) and row.regime == "subgaussian"


def test_bound_example(capsys):
    code, out, _ = call(capsys, "bound", "--family", "step", "--lnJp1", "4", "--q", "0.25", "--n", "1")
    rate = next(r for r in rows_of(out) if r.quantity == "rate")
    assert (code, rate.value, rate.regime) == (0, 1.0, "constant")


def test_oracle_example(capsys):
    code, out, _ = call(capsys, "oracle", "--family", "step", "--J", "1", "--q", "0.5", "--n", "2")
    assert code == 0
    assert rows_of(out)[0].value == pytest.approx(0.25)


def test_header_is_fixed(capsys):
    _, out, _ = call(capsys, "phi", "--lnJp1", "4", "--q", "0.25", "--n", "100")
    lines = out.splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 2


def test_validation_exit_code(capsys):
    code, out, err = call(capsys, "phi", "--lnJp1", "4", "--q", "0.7", "--n", "100")
    assert code == 1 and out == "" and "q" in err


def test_unknown_flag_is_validation_error(capsys):
    assert call(capsys, "phi", "--bogus", "1")[0] == 1
    assert call(capsys, "frobnicate")[0] == 1


def test_resource_exit_code(capsys):
    code, _, err = call(capsys, "oracle", "--family", "step", "--J", "3", "--q", "0.1", "--n", "200000")
    assert code == 2 and "cap" in err


def test_unwritable_output_is_resource_error(capsys, tmp_path):
    target = tmp_path / "missing" / "report.csv"
    assert call(capsys, "phi", "--lnJp1", "4", "--q", "0.25", "--n", "100", "--out", str(target))[0] == 2


def test_config_errors_name_the_field(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sequence": {"family": "step", "J": 3, "q": 0.9}, "n": [10]}))
    code, _, err = call(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "q" in err
    cfg.write_text(json.dumps({"sequence": {"family": "step", "J": 3, "q": 0.1}, "n": [10], "colour": 1}))
    code, _, err = call(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "colour" in err
    cfg.write_text(json.dumps({"sequence": {"family": "step", "J": 3, "q": 0.1}, "n": []}))
    code, _, err = call(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "n" in err


def test_sweep_crosses_grid(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(
        json.dumps(
            {
                "sequences": [
                    {"id": "a", "family": "step", "J": 10, "q": 0.1},
                    {"id": "b", "family": "poissonian", "alpha": 0.5, "n_ref": 50, "J": 10},
                ],
                "n": {"geometric": [10, 1000, 10]},
                "format": "json",
            }
        )
    )
    code, out, _ = call(capsys, "sweep", "--config", str(cfg))
    rows = rows_of(out, "json")
    rates = {(r.sequence, r.n) for r in rows if r.quantity == "rate"}
    assert code == 0 and rates == {(s, n) for s in "ab" for n in (10, 100, 1000)}


def test_const_override_changes_epsilon(capsys):
    base = call(capsys, "epsilon", "--logJ", "3", "--q", "0.1", "--n", "200")[1]
    tuned = call(capsys, "epsilon", "--logJ", "3", "--q", "0.1", "--n", "200", "--const", "c0=0.01")[1]
    eps = lambda text: next(r.value for r in rows_of(text) if r.quantity == "epsilon")
    assert eps(tuned) > eps(base)
    assert call(capsys, "epsilon", "--logJ", "3", "--q", "0.1", "--n", "2", "--const", "nope=1")[0] == 1


def test_openproblem_rows(capsys):
    code, out, _ = call(capsys, "openproblem", "--n", "100")
    got = {r.quantity: r.value for r in rows_of(out)}
    assert code == 0
    psi = (got["exact_upper"] - got["sqrt_S_over_n"]) / got["T_over_n"]
    assert got["implied_psi"] == pytest.approx(psi, rel=1e-12)


def test_dkw_emits_bound_rows(capsys):
    code, out, _ = call(capsys, "dkw", "--n", "50", "--x0", "0.1", "--t", "1,2", "--trials", "500", "--seed", "4")
    names = {r.quantity for r in rows_of(out)}
    assert code == 0 and {"exceedance_t=1", "local_dkw_bound_t=2"} <= names


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--family", "step", "--J", "3", "--q", "0.2", "--n", "10", "--trials", "3000", "--seed", "3",
         "--thresholds", "0.3"],
        ["simulate", "--family", "explicit", "--values", "0.3,0.1", "--target", "coupled", "--n", "10,20",
         "--trials", "3000", "--seed", "5"],
        ["simulate", "--family", "explicit", "--values", "0.01,0.01", "--kind", "variance", "--target", "two_point",
         "--n", "10", "--trials", "3000", "--seed", "5"],
        ["dkw", "--n", "30", "--x0", "0.2", "--t", "1", "--trials", "3000", "--seed", "8"],
    ],
)
def test_byte_identical_reruns_across_workers(capsys, argv, monkeypatch):
    first = call(capsys, *argv, "--workers", "1")[1]
    monkeypatch.setenv("DEVBOUND_THREADS", "8")
    second = call(capsys, *argv, "--workers", "8")[1]
    assert first == second and first


def test_lq_and_hp_commands(capsys):
    code, out, _ = call(capsys, "lq", "--family", "step", "--J", "4", "--q", "0.5", "--n", "100", "--qnorm", "2,4")
    assert code == 0 and any(r.quantity == "asymptotic_rate_q=2" for r in rows_of(out))
    code, out, _ = call(capsys, "hp", "--family", "step", "--lnJp1", "8", "--q", "0.01", "--n", "1000",
                        "--gamma", "0.1", "--exact")
    got = {r.quantity: r.value for r in rows_of(out)}
    assert code == 0 and got["hp_upper_gamma=0.1"] >= got["hp_lower_gamma=0.1"]


def test_emit_examples():
    row = ReportRow("e", "s", 3, "x", 0.1)
    assert len(render([row], "csv").splitlines()) == 2
    with pytest.raises(ValidationError):
        render([], "csv")


finite = st.floats(allow_nan=False, allow_infinity=True, width=64)
opt = st.none() | st.floats(allow_nan=False, allow_infinity=False)
rows = st.builds(
    ReportRow,
    st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=10),
    st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=10),
    st.none() | st.integers(1, 10**9),
    st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=10),
    finite,
    st.none() | st.sampled_from(["subgaussian", "constant"]),
    opt,
    opt,
    opt,
    opt,
)


@given(st.lists(rows, min_size=1, max_size=5), st.sampled_from(["csv", "json"]))
@settings(max_examples=100, deadline=None)
def test_report_round_trip(rs, fmt):
    assert parse_report(render(rs, fmt), fmt) == rs
