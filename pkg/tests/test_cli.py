"""Command line driver: exit codes, summary schema, deterministic artifacts."""

import hashlib
import json

from dunkl_lab.cli import main

LATTICE = {"d": 1, "N": 1, "family": "A", "rank": 1, "k": 0.25, "c": 1.0,
           "eps0": 0.1, "range": 2, "box_radius": 2,
           "decay": {"type": "summable", "delta": 1.0}}

SUMMARY_KEYS = {"experiment", "verdict", "mode", "margins", "hypotheses",
                "seeds", "versions", "config_sha256", "outputs", "details",
                "notes"}

HYPOTHESIS_KEYS = {"drift-equivariance", "jump-rate-sign", "eta-negative",
                   "gamma-below-half", "zeta-finite", "coalescence-constants"}

FD_COLUMNS = ["experiment", "system", "k", "c", "t", "x", "quantity",
              "estimate", "std_error", "bound", "margin", "pass"]


def run_cli(tmp_path, cmd, cfg, extra=(), name="config.json"):
    cfg_path = tmp_path / name
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / ("out_" + name.replace(".", "_"))
    code = main([cmd, "--config", str(cfg_path), "--out", str(out), *extra])
    summary = None
    sp = out / "summary.json"
    if sp.exists():
        summary = json.loads(sp.read_text())
    return code, summary, out, cfg_path


def test_calculus_check_happy_path(tmp_path):
    cfg = {"root": {"family": "A", "rank": 2, "k": "1/3"}, "n_polys": 4,
           "n_probes": 500, "seed": 1}
    code, summary, out, cfg_path = run_cli(tmp_path, "calculus-check", cfg)
    assert code == 0
    assert summary["verdict"] == "pass"
    assert SUMMARY_KEYS <= set(summary)
    digest = hashlib.sha256(cfg_path.read_bytes()).hexdigest()
    assert summary["config_sha256"] == digest
    csv = (out / summary["outputs"]["results_csv"]).read_text()
    assert csv.splitlines()[0].startswith("check,")
    # every tracked identity is exact in exact mode
    assert all(m == 0.0 for m in summary["margins"].values())


def test_fd_sim_rerun_is_byte_identical(tmp_path):
    cfg = {"root": {"family": "A", "rank": 1, "k": 0.25},
           "drift": {"kind": "linear", "c": 1.0},
           "f": "x1", "x0": [1.0], "t_grid": [0.25, 0.5],
           "sim": {"n_replicas": 400, "dt": 0.002}, "seed": 4}
    code1, s1, out1, _ = run_cli(tmp_path, "fd-sim", cfg, name="a.json")
    code2, s2, out2, _ = run_cli(tmp_path, "fd-sim", cfg, name="b.json")
    assert code1 == code2 == 0
    assert (out1 / "fd_sim.csv").read_bytes() == (out2 / "fd_sim.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()


def test_seed_override_changes_estimates(tmp_path):
    cfg = {"root": {"family": "A", "rank": 1, "k": 0.25},
           "drift": {"kind": "linear", "c": 1.0},
           "f": "x1", "x0": [1.0], "t_grid": [0.5],
           "sim": {"n_replicas": 400, "dt": 0.002}, "seed": 4}
    _, s1, out1, _ = run_cli(tmp_path, "fd-sim", cfg, name="base.json")
    _, s2, out2, _ = run_cli(tmp_path, "fd-sim", cfg, extra=("--seed", "99"),
                             name="override.json")
    assert s1["seeds"]["effective"] == 4
    assert s2["seeds"]["effective"] == 99 and s2["seeds"]["config"] == 4
    row1 = (out1 / "fd_sim.csv").read_text().splitlines()[1].split(",")
    row2 = (out2 / "fd_sim.csv").read_text().splitlines()[1].split(",")
    est = FD_COLUMNS.index("estimate")
    assert row1[est] != row2[est]


def test_schema_violations_exit_2(tmp_path):
    # missing required key
    cfg = {"root": {"family": "A", "rank": 1, "k": 0.25}}
    code, summary, _, _ = run_cli(tmp_path, "fd-sim", cfg, name="missing.json")
    assert code == 2 and summary is None
    # unknown key
    cfg = {"root": {"family": "A", "rank": 2, "k": 0.3}, "bogus": 1}
    code, _, _, _ = run_cli(tmp_path, "calculus-check", cfg, name="extra.json")
    assert code == 2
    # wrong type
    cfg = {"root": {"family": "A", "rank": 2, "k": 0.3}, "n_polys": "many"}
    code, _, _, _ = run_cli(tmp_path, "calculus-check", cfg, name="type.json")
    assert code == 2


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["fd-sim", "--config", str(bad)]) == 2
    assert main(["fd-sim", "--config", str(tmp_path / "nope.json")]) == 2


def test_model_construction_failure_exits_3(tmp_path):
    cfg = {"lattice": dict(LATTICE, eps0=1.5), "t_grid": [0.5]}
    code, _, _, _ = run_cli(tmp_path, "lattice-sim", cfg)
    assert code == 3


def test_exhausted_ensemble_exits_1(tmp_path):
    # absurd substep budget flags every replica on the first step
    cfg = {"root": {"family": "A", "rank": 2, "k": 1.0},
           "drift": {"kind": "linear", "c": 1.0},
           "f": "x1", "x0": [0.3, 0.0, -0.3], "t_grid": [0.5],
           "sim": {"n_replicas": 20, "dt": 0.01, "p_max": 0.01,
                   "min_substep_factor": 0.9}}
    code, _, _, _ = run_cli(tmp_path, "fd-sim", cfg)
    assert code == 1


def test_empty_result_set_writes_header_only_csv(tmp_path):
    cfg = {"root": {"family": "A", "rank": 1, "k": 0.25},
           "drift": {"kind": "linear", "c": 1.0},
           "x0": [2.0], "t_grid": [0.0],
           "sim": {"n_replicas": 50, "dt": 0.002}}
    code, summary, out, _ = run_cli(tmp_path, "lyapunov", cfg)
    assert code == 0
    text = (out / "lyapunov.csv").read_text()
    assert len(text.splitlines()) == 1  # header only


def test_exploratory_mode_flagged(tmp_path):
    cfg = {"root": {"family": "A", "rank": 1, "k": 0.6},
           "drift": {"kind": "linear", "c": 1.0},
           "f": "x1", "t_grid": [0.0, 0.25], "n_probes": 1,
           "sim": {"n_replicas": 300, "dt": 0.002}}
    code, summary, _, _ = run_cli(tmp_path, "gradient-bound", cfg)
    assert code == 0
    assert summary["mode"] == "exploratory"
    assert summary["hypotheses"]["eta-negative"]["status"] == "warn"
    assert summary["hypotheses"]["gamma-below-half"]["status"] == "warn"


def test_ergodicity_identical_configs(tmp_path):
    window = {"fill": 0.2, "overrides": [{"site": [0], "value": [1.0]}]}
    cfg = {"lattice": LATTICE, "omega0": window, "omega0_prime": window,
           "t_grid": [0.25, 0.5], "sim": {"n_replicas": 200, "dt": 0.002}}
    code, summary, out, _ = run_cli(tmp_path, "ergodicity", cfg)
    assert code == 0
    assert summary["verdict"] == "pass"
    assert summary["details"]["identical"] is True
    lines = (out / "ergodicity.csv").read_text().splitlines()
    assert lines[0] == "t,delta,std_error"
    assert all(line.split(",")[1] == "0.0" for line in lines[1:])


def test_lattice_summary_reports_all_hypotheses(tmp_path):
    cfg = {"lattice": LATTICE, "t_grid": [0.25],
           "sim": {"n_replicas": 150, "dt": 0.002}}
    code, summary, _, _ = run_cli(tmp_path, "lattice-sim", cfg)
    assert code == 0
    assert HYPOTHESIS_KEYS <= set(summary["hypotheses"])
    for item in summary["hypotheses"].values():
        assert item["status"] in ("pass", "warn", "not-applicable")


def test_decoupled_cauchy_reports_exact_zero(tmp_path):
    cfg = {"lattice": dict(LATTICE, eps0=0.0), "t": 0.5, "box_radii": [1, 2],
           "n_probes": 2, "sim": {"n_replicas": 150, "dt": 0.002}}
    code, summary, _, _ = run_cli(tmp_path, "cauchy", cfg)
    assert code == 0
    assert summary["verdict"] == "pass"
    assert summary["details"]["all_exact_zero"] is True
