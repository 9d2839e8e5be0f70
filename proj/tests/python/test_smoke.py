import math

import pytest

import maxfb

SMALL = """
[domain]
nx = 6
ny = 6
nz = 6

[feedback]
gamma1 = 1
gamma2 = 0.5

[run]
steps = 40

[analysis]
xi = 0.5
"""


def test_feedback_law():
    assert list(maxfb.eval_g([1.0, -2.0, 0.5], "linear", 2.0)) == [2.0, -4.0, 1.0]
    assert maxfb.monotonicity_constants("saturating", 1.0, 0.5) == (1.0, 1.5)


def test_constants():
    k = maxfb.xi_default(1.0, 0.5, 1.0, 1.0)
    assert (k["xi"], k["c1E"], k["c2E"]) == (0.5, 0.25, 1.75)
    with pytest.raises(maxfb.AssumptionError):
        maxfb.xi_default(1.0, 1.1, 1.0, 1.0)
    gamma, lam = maxfb.appendix_rate(1.0, 4.0)
    assert gamma == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert lam == pytest.approx(math.log(3.0) / 4.0, abs=1e-15)
    _, c, C = maxfb.generator_constants(1.0, 2.0, 1.0, 1.0, 0.25)
    assert c == pytest.approx(2.0 * math.log(2.0))
    assert C == pytest.approx(4.0 * math.log(2.0) + 1.0)


def test_simulate_is_dissipative():
    out = maxfb.simulate(SMALL)
    E = out["E_xi"]
    assert len(E) == 41
    assert max(b - a for a, b in zip(E, E[1:])) <= 1e-12
    assert out["certificate_eligible"]
    # The upper side needs a finer grid; this resolution is only a smoke test.
    check = maxfb.two_sided_check(out["t"], E, out["D"], 0.25, 1.75)
    assert check["lower_pass"] and check["pairs"] == 820


def test_config_errors():
    with pytest.raises(maxfb.ConfigError, match="duplicate"):
        maxfb.simulate(SMALL + "[run]\nsteps = 3\n")
    assert "feedback" in maxfb.echo_config(SMALL)


def test_fit_decay():
    t = [0.1 * i for i in range(50)]
    E = [2.0 * math.exp(-0.3 * x) for x in t]
    lam, r2 = maxfb.fit_decay(t, E, 1.0, 4.0)
    assert lam == pytest.approx(0.3, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_operator_checks():
    cfg = SMALL.replace("nx = 6", "nx = 4").replace("ny = 6", "ny = 4").replace("nz = 6", "nz = 4")
    cfg += "[operator]\nM = 8\n"
    r = maxfb.monotonicity(cfg, pairs=50)
    assert r["pass"] and r["min_normalized"] >= -1e-10
    res = maxfb.resolvent(cfg, b=2.0)
    assert res["residual"] <= 1e-8


def test_cli_hypothesis_gate(tmp_path):
    cfg = tmp_path / "dominant.cfg"
    cfg.write_text("[domain]\nnx = 6\nny = 6\nnz = 6\n[feedback]\ngamma1 = 1\ngamma2 = 1.1\n[run]\nsteps = 2\n")
    code, _, err = maxfb.run_cli(["run", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 3
    assert "gamma1 c1 > gamma2 c2" in err
