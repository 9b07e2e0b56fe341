import json

import numpy as np
import pytest

from gbvlab.cli import main
from gbvlab.config import ConfigError, parse_config

DOUBLING_INI = """
[map]
kind = doubling

[weight]
kind = inverse-derivative
alpha = 0.5

[assumptions]
p = 4.0

[run]
beta = 0.5
cells = 16,64
nmax = 8
seed = 1
"""

CASCADE_INI = """
[map]
kind = cascade
j_max = 40

[weight]
kind = power
delta = 1.0
alpha = 0.5

[assumptions]
p = 4.0

[run]
cells = 32
nmax = 8
seed = 3
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_config_sections():
    cfg = parse_config(DOUBLING_INI)
    assert cfg.map["kind"] == "doubling"
    assert cfg.weight["kind"] == "inverse-derivative"
    assert cfg.run["cells"] == [16, 64]
    assert len(cfg.digest()) == 16


def test_parse_config_field_errors():
    with pytest.raises(ConfigError) as err:
        parse_config("[map]\nkind = spiral\n[weight]\nkind = constant\n")
    assert err.value.field_path == "map.kind"
    bad = "[map]\nkind = affine\nbranches =\n    0.5 0.2 2.0 0.0\n[weight]\nkind = constant\n"
    with pytest.raises(ConfigError) as err:
        parse_config(bad)
    assert err.value.field_path == "map.branches[0]"


def test_check_passes(tmp_path, capsys):
    code = main(["check", "--config", write(tmp_path, DOUBLING_INI)])
    out = capsys.readouterr().out
    assert code == 0
    assert "result: pass" in out
    assert "expansion_inf = 2.0" in out


def test_check_fails_on_exponent(tmp_path, capsys):
    ini = DOUBLING_INI.replace("kind = inverse-derivative", "kind = constant\nvalue = 0.5")
    ini = ini.replace("p = 4.0", "p = 1.5")
    code = main(["check", "--config", write(tmp_path, ini)])
    out = capsys.readouterr().out
    assert code == 1
    assert "p > 1/alpha" in out


def test_parse_error_exit_code(tmp_path, capsys):
    bad = "[map]\nkind = affine\nbranches =\n    0.9 0.1 2.0 0.0\n[weight]\nkind = constant\n[run]\nseed = 1\n"
    code = main(["check", "--config", write(tmp_path, bad)])
    err = capsys.readouterr().err
    assert code == 2
    assert "map.branches[0]" in err


def test_spectrum_csv_output(tmp_path, capsys):
    out = tmp_path / "report.csv"
    code = main(["spectrum", "--config", write(tmp_path, DOUBLING_INI),
                 "--output", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith("# gbvlab config=")
    # the essential bound column: lambda_n_root approaches it; headline printed
    printed = capsys.readouterr().out
    assert "0.7071067811865476" in printed
    assert "n,lambda1_hat,lambda2_hat,lambda_n,lambda_n_root" in text
    assert "N,ritz_index,re,im,modulus,classification" in text


def test_spectrum_emits_small_ulam_matrix(tmp_path):
    ini = DOUBLING_INI.replace("cells = 16,64", "cells = 2")
    out = tmp_path / "report.json"
    code = main(["spectrum", "--config", write(tmp_path, ini),
                 "--output", str(out), "--format", "json"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["ulam"]["2"] == [[0.5, 0.5], [0.5, 0.5]]


def test_spectrum_thread_determinism(tmp_path):
    cfg = write(tmp_path, DOUBLING_INI)
    paths = [tmp_path / f"s{t}.csv" for t in (1, 8)]
    for t, path in zip((1, 8), paths):
        main(["spectrum", "--config", cfg, "--output", str(path),
              "--threads", str(t)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_spectrum_requires_seed(tmp_path, capsys):
    ini = DOUBLING_INI.replace("seed = 1", "")
    code = main(["spectrum", "--config", write(tmp_path, ini)])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_spectrum_refusal_and_force(tmp_path, capsys):
    ini = DOUBLING_INI.replace("kind = inverse-derivative", "kind = constant\nvalue = 0.5")
    ini = ini.replace("p = 4.0", "p = 1.5")
    cfg = write(tmp_path, ini)
    code = main(["spectrum", "--config", cfg])
    assert code == 1
    assert "p > 1/alpha" in capsys.readouterr().err
    out = tmp_path / "forced.csv"
    assert main(["spectrum", "--config", cfg, "--force", "--output", str(out)]) == 0


def test_spectrum_tolerance_exit_code(tmp_path, capsys):
    ini = DOUBLING_INI.replace("kind = inverse-derivative", "kind = weierstrass")
    ini = ini.replace("[run]", "[run]\nsubdivisions = 1\ncheck_tolerance = 1e-14")
    ini = ini.replace("[assumptions]\np = 4.0",
                      "[assumptions]\np = 4.0\nrefinement_depth = 0")
    code = main(["spectrum", "--config", write(tmp_path, ini)])
    assert code == 3
    assert "tolerance" in capsys.readouterr().err


def test_gbv_values(tmp_path, capsys):
    cfg = write(tmp_path, DOUBLING_INI)
    main(["gbv", "--config", cfg, "--density", "constant", "--beta", "1.0",
          "--cells", "16"])
    assert "value = 1.0" in capsys.readouterr().out
    main(["gbv", "--config", cfg, "--density", "step", "--beta", "1.0",
          "--cells", "2"])
    assert "value = 3.0" in capsys.readouterr().out
    main(["gbv", "--config", cfg, "--density", "step", "--beta", "0.5",
          "--cells", "2"])
    out = capsys.readouterr().out
    value = float(out.split("value = ")[1].split("\n")[0])
    assert 1.0 - 1e-12 <= value <= 3.0 + 1e-9  # sandwich between mass and variation


def test_gbv_density_file(tmp_path, capsys):
    cfg = write(tmp_path, DOUBLING_INI)
    sample = tmp_path / "density.txt"
    sample.write_text("2.0 0.0\n")
    main(["gbv", "--config", cfg, "--density", str(sample), "--beta", "1.0"])
    assert "value = 3.0" in capsys.readouterr().out


def test_gbv_unknown_density(tmp_path):
    cfg = write(tmp_path, DOUBLING_INI)
    with pytest.raises(ValueError):
        main(["gbv", "--config", cfg, "--density", "mystery"])


def test_ly_determinism(tmp_path):
    cfg = write(tmp_path, DOUBLING_INI.replace("kind = inverse-derivative",
                                               "kind = constant\nvalue = 0.5"))
    outs = [tmp_path / f"ly{i}.csv" for i in (0, 1)]
    for path in outs:
        main(["ly", "--config", cfg, "--cells", "64", "--ensemble", "8",
              "--nmax", "2", "--seed", "7", "--output", str(path)])
    assert outs[0].read_bytes() == outs[1].read_bytes()
    header = outs[0].read_text().splitlines()[1]
    assert header == "n,coeff,c_fixed,theta_env,c_env,slack_max,slack_mean"


def test_mollify_sweep_table(tmp_path, capsys):
    cfg = write(tmp_path, CASCADE_INI.replace("kind = power\ndelta = 1.0",
                                              "kind = power\ndelta = 1.0")
                .replace("kind = cascade\nj_max = 40", "kind = doubling"))
    main(["mollify-sweep", "--config", cfg])
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[1] == "eps,sup_error,sup_derivative"
    assert len(lines) == 2 + 7  # default dyadic range 4:10


def test_cascade_config_end_to_end(tmp_path, capsys):
    cfg = write(tmp_path, CASCADE_INI)
    assert main(["check", "--config", cfg]) == 0
    out = tmp_path / "cascade.json"
    assert main(["spectrum", "--config", cfg, "--output", str(out),
                 "--format", "json"]) == 0
    payload = json.loads(out.read_text())
    assert payload["report"]["rho_bound"] <= 1.0 + 1e-12
