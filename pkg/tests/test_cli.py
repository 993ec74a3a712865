import json

import numpy as np
import pytest

from semiwave.cli import main
from semiwave.config import load_config
from semiwave.errors import ConfigError

HARMONIC_CFG = """
[potential]
kind = "harmonic"

[initial]
a = [1.0]
eta = [0.0]
coefficients = [[[0], 0.7071067811865476, 0.0], [[1], 0.7071067811865476, 0.0]]

[run]
hbar = [0.1]
g = 0.4
T = 1.0
times = [0.5, 1.0]
tol = 1e-10

[grid]
points = 1024
dt = 2e-4

[localize]
radii = [0.25, 0.5, 1.0]
"""


@pytest.fixture()
def harmonic_config(tmp_path):
    p = tmp_path / "harm.toml"
    p.write_text(HARMONIC_CFG)
    return p


def test_config_roundtrip(harmonic_config):
    cfg = load_config(harmonic_config)
    assert cfg.hbar_list == [0.1]
    assert cfg.g == 0.4
    assert abs(sum(abs(c) ** 2 for c in cfg.initial.coefficients.values()) - 1) < 1e-10


def test_config_errors_name_fields(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(HARMONIC_CFG.replace('g = 0.4', ''))
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert "run.g" in str(exc.value)

    bad2 = tmp_path / "bad2.toml"
    bad2.write_text(HARMONIC_CFG.replace("0.7071067811865476, 0.0]]", "0.9, 0.0]]"))
    with pytest.raises(ConfigError) as exc:
        load_config(bad2)
    assert "initial.coefficients" in str(exc.value)

    bad3 = tmp_path / "bad3.toml"
    bad3.write_text(HARMONIC_CFG.replace("points = 1024", "points = 1000"))
    with pytest.raises(ConfigError) as exc:
        load_config(bad3)
    assert "grid.points" in str(exc.value)


def test_decay_on_polynomial_rejected(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("""
[potential]
kind = "quartic"
decay = {beta = 2.0, v0 = 1.0, v1 = 1.0}

[initial]
a = [0.0]
eta = [0.0]

[run]
hbar = [0.1]
g = 0.4
""")
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "potential.decay" in str(exc.value)


def test_cond1_violation_in_config(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(HARMONIC_CFG + "\n" + "")
    text = p.read_text().replace("[run]", "A_re = [[2.0]]\n\n[run]")
    p.write_text(text)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert "initial.A" in str(exc.value)


def test_propagate_and_determinism(tmp_path, harmonic_config):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["propagate", "--config", str(harmonic_config),
                 "--out", str(out1), "--seed", "7"]) == 0
    assert main(["propagate", "--config", str(harmonic_config),
                 "--out", str(out2), "--seed", "7"]) == 0
    r1 = (out1 / "results.csv").read_bytes()
    r2 = (out2 / "results.csv").read_bytes()
    assert r1 == r2
    lines = r1.decode().strip().splitlines()
    assert lines[0].startswith("# semiwave schema=1")
    assert lines[1] == "hbar,t,l_mode,l,error_vs_oracle,residual_norm,outside_mass_b"
    # harmonic: oracle-level error, zero residual
    for row in lines[2:]:
        cols = row.split(",")
        assert float(cols[4]) < 1e-6
        assert float(cols[5]) < 1e-12
    assert (out1 / "timings.csv").exists()
    assert (out1 / "hbar_0.1" / "trajectory.json").exists()
    assert (out1 / "hbar_0.1" / "psi_000.npy").exists()
    meta = json.loads((out1 / "hbar_0.1" / "psi_000.json").read_text())
    assert meta["schema_version"] == 1 and meta["hbar"] == 0.1


def test_propagate_parallel_identical(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(HARMONIC_CFG.replace("hbar = [0.1]", "hbar = [0.1, 0.2]"))
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["propagate", "--config", str(p), "--out", str(out1)]) == 0
    assert main(["propagate", "--config", str(p), "--out", str(out2),
                 "--jobs", "2"]) == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()


def test_localize_monotone(tmp_path, harmonic_config):
    out = tmp_path / "loc"
    assert main(["localize", "--config", str(harmonic_config),
                 "--out", str(out)]) == 0
    rows = [r.split(",") for r in
            (out / "localize.csv").read_text().strip().splitlines()[2:]]
    by_t = {}
    for hbar, t, b, m in rows:
        by_t.setdefault(t, []).append((float(b), float(m)))
    for t, pairs in by_t.items():
        pairs.sort()
        masses = [m for _, m in pairs]
        assert all(m1 >= m2 for m1, m2 in zip(masses, masses[1:]))


def test_ehrenfest_mode(tmp_path):
    p = tmp_path / "ehr.toml"
    p.write_text("""
[potential]
kind = "double_well"

[initial]
a = [0.0]
eta = [0.0]

[run]
hbar = [0.1, 0.05]
g = 0.4
tol = 1e-10

[grid]
points = 1024
dt = 1e-4

[ehrenfest]
T_prime = 0.1
tau = 0.0
v = 1.0
lyapunov_t_end = 10.0
""")
    out = tmp_path / "ehr_out"
    assert main(["ehrenfest", "--config", str(p), "--out", str(out)]) == 0
    win = json.loads((out / "ehrenfest_window.json").read_text())
    assert win["lambda_fit"] == pytest.approx(1.0, rel=0.05)
    assert win["kappa_window"][0] < win["kappa_window"][1]
    rows = (out / "ehrenfest.csv").read_text().strip().splitlines()[2:]
    errs = {float(r.split(",")[0]): float(r.split(",")[5]) for r in rows}
    assert all(e < 0.1 for e in errs.values())


def test_scatter_mode_free_identity(tmp_path):
    p = tmp_path / "scat.toml"
    p.write_text("""
[potential]
kind = "free"

[initial]
a = [0.5]
eta = [2.0]

[run]
hbar = [0.1]
g = 0.3

[scatter]
g = 0.3
tol = 1e-8
""")
    out = tmp_path / "scat_out"
    assert main(["scatter", "--config", str(p), "--out", str(out)]) == 0
    rep = json.loads((out / "scatter_hbar_0.1.json").read_text())
    assert rep["unitarity_deviation"] == 0.0
    assert rep["coefficients"] == [[[0], 1.0, 0.0]]
    assert abs(rep["future"]["S"]) < 1e-10


def test_exit_codes(tmp_path, harmonic_config):
    assert main(["propagate", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path / "x")]) == 2
    # trapped orbit -> numerical failure exit 3
    p = tmp_path / "trap.toml"
    p.write_text("""
[potential]
kind = "gaussian_sum"
amplitudes = [-4.0]
centers = [[0.0]]
widths = [[1.0]]
decay = {beta = 2.0, v0 = 16.0, v1 = 4.0}

[initial]
a = [0.0]
eta = [0.5]

[run]
hbar = [0.1]
g = 0.3

[scatter]
tol = 1e-8
""")
    assert main(["scatter", "--config", str(p), "--out", str(tmp_path / "y")]) == 3


def test_tail_class_initial_state(tmp_path):
    p = tmp_path / "tail.toml"
    p.write_text("""
[potential]
kind = "quartic"

[initial]
a = [1.0]
eta = [0.0]
tail = {K = 0.5, nu = 2}

[run]
hbar = [0.1]
g = 0.4
T = 0.5
times = [0.5]
tol = 1e-9

[grid]
points = 2048
dt = 2e-4
""")
    out = tmp_path / "tail_out"
    assert main(["propagate", "--config", str(p), "--out", str(out)]) == 0
    rep = json.loads((out / "hbar_0.1" / "tail_report.json").read_text())
    assert rep["J"] == 2 * 4
    assert rep["tail_mass"] <= rep["tail_bound"] <= np.exp(-0.5 * rep["J"]) * 1.0001
    assert rep["tail_ok"]


def test_declared_tail_verification(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("""
[potential]
kind = "harmonic"

[initial]
a = [0.0]
eta = [0.0]
coefficients = [[[0], 0.9486832980505138, 0.0], [[2], 0.31622776601683794, 0.0]]
declared_tail_K = 0.4

[run]
hbar = [0.1]
g = 0.4
""")
    cfg = load_config(p)   # |c_2| = 0.316 <= e^{-0.8} = 0.449 holds
    assert cfg.initial.declared_tail_K == 0.4
    p2 = tmp_path / "c2.toml"
    p2.write_text(p.read_text().replace("declared_tail_K = 0.4",
                                        "declared_tail_K = 1.0"))
    with pytest.raises(ConfigError) as exc:
        load_config(p2)
    assert "declared_tail_K" in str(exc.value)
