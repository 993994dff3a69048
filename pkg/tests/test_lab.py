import io
import json

import numpy as np
import pytest
from rich.console import Console

from src.ensembles import read_matrix_csv
from src.errors import NumericalFailureError
from src.lab import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, LabManager, build_parser, main

CAMPAIGN = """
name = cli_run
experiment = simple_spectrum
trials = 3
master_seed = 5
acceptance = true

[ensemble]
n = 5
atom.kind = rademacher

[thresholds]
min_pass = {min_pass}
"""


@pytest.fixture(scope="function")
def lab(mock_config):
    manager = LabManager(config=mock_config)
    output = io.StringIO()
    manager.view.console = Console(file=output, width=10_000)
    manager.view.log_console = Console(file=io.StringIO(), width=10_000)
    return manager, output


def _json(output: io.StringIO):
    return json.loads(output.getvalue())


def test_lab_initialization(lab):
    manager, _ = lab
    assert manager.view is not None
    assert set(manager.commands) == {"gen", "spectrum", "structure", "control", "graph",
                                     "campaign", "plot"}


def test_gen_integer_lists(lab):
    manager, output = lab
    assert manager.run(["gen", "--n", "3", "--seed", "1", "--integer"]) == EXIT_OK
    matrix = _json(output)
    assert len(matrix) == 3
    assert {x for row in matrix for x in row} <= {-1, 1}


def test_gen_is_reproducible(lab, tmp_path):
    manager, _ = lab
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    manager.run(["gen", "--n", "4", "--seed", "9", "--out", str(first)])
    manager.run(["gen", "--n", "4", "--seed", "9", "--out", str(second)])
    assert first.read_text() == second.read_text()
    assert read_matrix_csv(first).shape == (4, 4)


def test_gen_digraph(lab, tmp_path):
    manager, _ = lab
    path = tmp_path / "adj.csv"
    assert manager.run(["gen", "--n", "6", "--p", "1/2", "--out", str(path)]) == EXIT_OK
    adj = read_matrix_csv(path)
    assert np.all(np.diagonal(adj) == 0)
    assert set(np.unique(adj)) <= {0, 1}


def test_gen_overrides(lab, tmp_path):
    manager, _ = lab
    path = tmp_path / "zero_diag.csv"
    manager.run(["gen", "--n", "5", "--set", "diagonal=zero", "--out", str(path)])
    assert np.all(np.diagonal(read_matrix_csv(path)) == 0)


def test_gen_from_spec_file(lab, tmp_path):
    manager, output = lab
    spec = tmp_path / "ensemble.cfg"
    spec.write_text("[ensemble]\nn = 3\natom.kind = centered_bernoulli\natom.p = 1/4\n")
    assert manager.run(["gen", "--spec", str(spec), "--seed", "2"]) == EXIT_OK
    assert read_matrix_csv(output.getvalue()).shape == (3, 3)


def test_gen_bad_override_is_a_configuration_error(lab):
    manager, _ = lab
    assert manager.run(["gen", "--set", "colour=red"]) == EXIT_CONFIG


def test_spectrum(lab, tmp_path):
    manager, output = lab
    matrix, scatter = tmp_path / "m.csv", tmp_path / "scatter.csv"
    matrix.write_text("2,0\n0,-1\n")
    code = manager.run(["spectrum", str(matrix), "--exact", "--scatter", str(scatter)])
    assert code == EXIT_OK
    result = _json(output)
    assert result["gap"]["delta"] == pytest.approx(3.0)
    assert result["charpoly"]["coefficients"] == ["1", "-1", "-2"]
    assert result["simple_spectrum"] is True
    assert scatter.read_text().startswith("re,im")


def test_spectrum_missing_file(lab, tmp_path):
    manager, _ = lab
    assert manager.run(["spectrum", str(tmp_path / "missing.csv")]) == EXIT_FAILED


def test_spectrum_numerical_failure(lab, tmp_path, mocker):
    manager, _ = lab
    matrix = tmp_path / "m.csv"
    matrix.write_text("1,0\n0,1\n")
    mocker.patch("src.lab.eigen_decompose",
                 side_effect=NumericalFailureError("no convergence", worst_residual=1.0))
    assert manager.run(["spectrum", str(matrix)]) == EXIT_FAILED


def test_structure_normalizes_input(lab, tmp_path):
    manager, output = lab
    vector = tmp_path / "v.csv"
    vector.write_text("3,4\n")
    assert manager.run(["structure", str(vector), "--atom", "rademacher", "--t", "0.1"]) == EXIT_OK
    report = _json(output)
    assert report["n"] == 2
    assert report["is_complex"] is False
    assert report["levy"][0]["mode"] == "exact_enumeration"


def test_structure_complex_json(lab, tmp_path):
    manager, output = lab
    vector = tmp_path / "z.json"
    vector.write_text(json.dumps([[0.6, 0.0], [0.0, 0.8]]))
    assert manager.run(["structure", str(vector)]) == EXIT_OK
    report = _json(output)
    assert report["is_complex"] is True
    assert report["correlation"] == pytest.approx(0.48)


def test_control(lab, tmp_path):
    manager, output = lab
    A, b = tmp_path / "A.csv", tmp_path / "b.csv"
    A.write_text("0,1\n0,0\n")
    b.write_text("0\n1\n")
    assert manager.run(["control", str(A), str(b)]) == EXIT_OK
    payload = _json(output)
    assert payload["controllable"] is True
    assert payload["exact_rank"] == 2
    assert set(payload["verdicts"]) == {"numeric", "exact", "pbh"}


def test_control_shape_mismatch(lab, tmp_path):
    manager, _ = lab
    A, b = tmp_path / "A.csv", tmp_path / "b.csv"
    A.write_text("0,1\n0,0\n")
    b.write_text("1\n1\n1\n")
    assert manager.run(["control", str(A), str(b)]) == EXIT_FAILED


def test_graph_writes_scatter(lab, tmp_path):
    manager, output = lab
    scatter = tmp_path / "scatter.csv"
    code = manager.run(["graph", "--n", "30", "--seed", "4", "--scatter", str(scatter)])
    assert code == EXIT_OK
    assert '"scc_count"' in output.getvalue()
    assert len(scatter.read_text().splitlines()) == 31


def test_campaign_passes(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "run.cfg"
    config.write_text(CAMPAIGN.format(min_pass=0))
    code = manager.run(["campaign", "--config", str(config), "--workers", "1",
                        "--out", str(tmp_path / "runs")])
    assert code == EXIT_OK
    assert (tmp_path / "runs" / "cli_run" / "summary.json").exists()


def test_campaign_below_threshold(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "run.cfg"
    config.write_text(CAMPAIGN.format(min_pass=4))
    code = manager.run(["campaign", "--config", str(config), "--workers", "1",
                        "--out", str(tmp_path / "runs"), "--dry-run"])
    assert code == EXIT_FAILED
    assert not (tmp_path / "runs").exists()


def test_campaign_bad_config(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "run.cfg"
    config.write_text("name = broken\ntrials = 0\n")
    assert manager.run(["campaign", "--config", str(config)]) == EXIT_CONFIG


def test_plot_from_records(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "gap.cfg"
    config.write_text(CAMPAIGN.format(min_pass=0).replace("simple_spectrum", "gap_distribution"))
    manager.run(["campaign", "--config", str(config), "--workers", "1",
                 "--out", str(tmp_path / "runs")])
    out = tmp_path / "cdf.csv"
    records = tmp_path / "runs" / "cli_run" / "records.json"
    assert manager.run(["plot", "--records", str(records), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "s,cdf"
    assert len(lines) == 4


def test_plot_records_as_scatter(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "gap.cfg"
    config.write_text(CAMPAIGN.format(min_pass=0).replace("simple_spectrum", "gap_distribution"))
    manager.run(["campaign", "--config", str(config), "--workers", "1",
                 "--out", str(tmp_path / "runs")])
    out = tmp_path / "scatter.csv"
    records = tmp_path / "runs" / "cli_run" / "records.json"
    assert manager.run(["plot", "--records", str(records), "--kind", "scatter",
                        "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "re,im"
    assert all(float(line.split(",")[1]) == 0.0 for line in lines[1:])


def test_plot_unknown_quantity(lab, tmp_path):
    manager, _ = lab
    config = tmp_path / "run.cfg"
    config.write_text(CAMPAIGN.format(min_pass=0))
    manager.run(["campaign", "--config", str(config), "--workers", "1",
                 "--out", str(tmp_path / "runs")])
    records = tmp_path / "runs" / "cli_run" / "records.json"
    assert manager.run(["plot", "--records", str(records), "--quantity", "nothing"]) == EXIT_FAILED


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_main_uses_global_config(mocker):
    manager_class = mocker.patch("src.lab.LabManager")
    manager_class.return_value.run.return_value = EXIT_OK
    assert main(["graph", "--n", "5"]) == EXIT_OK
    manager_class.return_value.run.assert_called_once_with(["graph", "--n", "5"])
