import json

import pytest

from hazardlab import cli, crm, kernels
from hazardlab.asymptotics import PowerLog

MINIMAL = """
[experiment]
kind = regimes
"""

SIMULATE = """
[experiment]
kind = simulate
functional = cumulative_hazard
horizon = 40
replicates = 100
seed = 3
centering = quadrature

[kernel]
type = ornstein_uhlenbeck
kappa = 1.0

[crm]
family = extended_gamma
fn = constant
value = 1.0

[output]
format = json
"""


def test_minimal_document_gets_defaults():
    cfg = cli.parse_config(MINIMAL)
    assert cfg.kind == "regimes"
    assert cfg.epsilon == 1e-6
    assert cfg.t_grid == (50.0, 100.0, 200.0, 400.0, 800.0)
    assert cfg.replicates == 2000
    assert cfg.out_format == "json"


def test_unknown_key_reports_line_number():
    text = "[experiment]\nkind = regimes\nbogus_key = 3\n"
    with pytest.raises(cli.ConfigError, match=r"line 3: unknown key experiment.bogus_key"):
        cli.parse_config(text)
    with pytest.raises(cli.ConfigError, match=r"line 1: unknown section"):
        cli.parse_config("[nonsense]\nx = 1\n")
    with pytest.raises(cli.ConfigError, match=r"line 2: expected key = value"):
        cli.parse_config("[experiment]\nnot an assignment\n")


def test_missing_required_kernel_parameter():
    text = SIMULATE.replace("kappa = 1.0\n", "")
    with pytest.raises(cli.ConfigError, match="kernel.kappa"):
        cli.parse_config(text)
    text = "[experiment]\nkind = simulate\n\n[kernel]\ntype = rectangular\n\n[crm]\nfamily = beta\nvalue = 1\n"
    with pytest.raises(cli.ConfigError, match="kernel.tau"):
        cli.parse_config(text)


def test_constraint_violations_cite_the_rule():
    text = SIMULATE.replace("family = extended_gamma\nfn = constant\nvalue = 1.0",
                            "family = generalized_gamma\nsigma = 1.5\ngamma = 1.0")
    with pytest.raises(cli.ConfigError, match=r"sigma in \(0,1\)"):
        cli.parse_config(text)
    with pytest.raises(cli.ConfigError, match="replicates >= 100"):
        cli.parse_config(MINIMAL + "replicates = 10\n")


def test_round_trip_identity():
    cfg = cli.parse_config(SIMULATE)
    again = cli.parse_config(cli.render_config(cfg))
    assert again == cfg
    cfg2 = cli.parse_config(MINIMAL)
    assert cli.parse_config(cli.render_config(cfg2)) == cfg2
    # with a rate and expectations
    text = MINIMAL + ("rate = powerlog:-1,-0.5\nexpect_condition_5 = diverges\n"
                      "t_grid = 10,20,40,80\n")
    cfg3 = cli.parse_config(text)
    assert isinstance(cfg3.rate, PowerLog)
    assert cli.parse_config(cli.render_config(cfg3)) == cfg3


def test_kernel_and_crm_builders():
    cfg = cli.parse_config(SIMULATE)
    assert cfg.kernel == kernels.OrnsteinUhlenbeck(1.0)
    assert cfg.intensity == crm.ExtendedGamma(crm.Constant(1.0))
    text = SIMULATE.replace("type = ornstein_uhlenbeck\nkappa = 1.0",
                            "type = u_shaped\nbeta = 2.0") \
                   .replace("family = extended_gamma\nfn = constant\nvalue = 1.0",
                            "family = beta\nfn = indicator_sqrt\nb = 1.0")
    cfg = cli.parse_config(text)
    assert cfg.kernel == kernels.UShaped(2.0)
    assert cfg.intensity == crm.Beta(crm.IndicatorSqrt(1.0))


def test_regimes_command(tmp_path, capsys):
    out = tmp_path / "regimes.csv"
    rc = cli.main(["regimes", "--out", str(out), "--format", "csv"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# hazardlab ")       # provenance comment
    assert lines[1] == "kernel,crm,functional,rate,trend,variance,delta,supported"
    assert len(lines) > 40


def test_simulate_deterministic_files(tmp_path):
    cfg_path = tmp_path / "sim.ini"
    cfg_path.write_text(SIMULATE)
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(out2)]) == 0
    body1 = out1.read_text().splitlines()[1:]        # drop the path-bearing header
    body2 = out2.read_text().splitlines()[1:]
    assert body1 == body2
    blob = json.loads("\n".join(body1))
    assert 0.0 <= blob["ks_p_value"] <= 1.0
    assert len(blob["standardized_samples"]) == 100


def test_check_conditions_expectations_drive_exit_code(tmp_path):
    base = """
[experiment]
kind = check-conditions
theorem = path2nd
rate = power:-1
t_grid = 30,60,120,240
{expect}

[kernel]
type = dykstra_laud

[crm]
family = generalized_gamma
sigma = 0.5
gamma = 1.0

[output]
format = json
"""
    good = tmp_path / "good.ini"
    good.write_text(base.format(expect="expect_condition_5 = diverges"))
    out = tmp_path / "cond.json"
    assert cli.main(["check-conditions", "--config", str(good), "--out", str(out)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text(base.format(expect="expect_condition_5 = vanishes"))
    assert cli.main(["check-conditions", "--config", str(bad), "--out", str(out)]) == 2


def test_sample_paths_csv(tmp_path):
    cfg_path = tmp_path / "paths.ini"
    cfg_path.write_text(SIMULATE.replace("kind = simulate", "kind = sample-paths"))
    out = tmp_path / "paths.csv"
    assert cli.main(["sample-paths", "--config", str(cfg_path), "--grid", "257",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "t,hazard"
    assert len(lines) == 2 + 257


def test_subcommand_config_kind_mismatch(tmp_path):
    cfg_path = tmp_path / "sim.ini"
    cfg_path.write_text(SIMULATE)
    assert cli.main(["check-conditions", "--config", str(cfg_path)]) == 1


def test_operational_error_exit_code(tmp_path):
    missing = tmp_path / "nope.ini"
    assert cli.main(["simulate", "--config", str(missing)]) == 1
