import subprocess
import sys

import numpy as np
import pytest
import yaml

from latharm.cli import ConfigError, config_from_mapping, load_config, main
from latharm.eigensolver import lowest_eigenvalues
from latharm.harmonic import merged_levels
from latharm.lattice import assemble_hamiltonian, build_lattice
from latharm.model import validate_hypotheses
from latharm.report import COLUMNS, emit_report, read_report
from latharm.verify import (
    convergence_study,
    localization_defects,
    persson_estimate,
    psido_study,
    quasimode_gram_and_rayleigh,
)


# ----------------------------------------------------------------------------
# CSV round trips


def _header(path):
    return path.read_text().splitlines()[0].split(",")


def test_converge_roundtrip(tmp_path, m1):
    rep = convergence_study(m1, 4, [0.04, 0.02, 0.01, 0.005], 3.0)
    path = emit_report(rep, tmp_path)
    assert path.name == "converge.csv"
    assert _header(path) == ["eps", "k", "E_k", "eps_times_e_k", "abs_error"]
    back = read_report(path)
    assert back.rows == rep.rows
    assert back.slope(3) == rep.slope(3)


def test_defects_roundtrip(tmp_path, m1):
    reps = [localization_defects(m1, k, [0.1, 0.05, 0.025]) for k in ("ims", "microlocal")]
    path = emit_report(reps, tmp_path)
    assert _header(path) == ["eps", "kind", "norm"]
    back = read_report(path)
    assert [b.rows for b in back] == [r.rows for r in reps]
    assert [b.kind for b in back] == ["ims", "microlocal"]


def test_harmonic_roundtrip(tmp_path, m2):
    levels = merged_levels(m2, 3)
    assert read_report(emit_report(levels, tmp_path)) == levels


def test_validate_roundtrip(tmp_path, m1):
    rep = validate_hypotheses(m1)
    back = read_report(emit_report(rep, tmp_path), label=rep.label)
    assert back == rep


def test_spectrum_roundtrip(tmp_path, m1):
    res = lowest_eigenvalues(assemble_hamiltonian(m1, build_lattice(1, 0.05, 3.0)), 4)
    back = read_report(emit_report(res, tmp_path))
    assert back.eigenvalues.tobytes() == res.eigenvalues.tobytes()
    assert back.residuals.tobytes() == res.residuals.tobytes()


def test_quasimode_roundtrip(tmp_path, m1):
    diags = [quasimode_gram_and_rayleigh(m1, e, [(0, (0,)), (1, (1,))]) for e in (0.02, 0.01)]
    back = read_report(emit_report(diags, tmp_path))
    for a, b in zip(diags, back):
        assert a.levels == b.levels
        assert a.gram.tobytes() == b.gram.tobytes()
        assert a.rayleigh.tobytes() == b.rayleigh.tobytes()
        assert a.predicted.tobytes() == b.predicted.tobytes()


def test_persson_roundtrip(tmp_path, m2):
    res = persson_estimate(m2, 0.1, 0.5, [[1.0, 1.0], [-1.0, 0.5]])
    back = read_report(emit_report(res, tmp_path))
    np.testing.assert_array_equal(back.centers, res.centers)
    assert back.values.tobytes() == res.values.tobytes()


def test_psido_roundtrip(tmp_path, m1):
    rep = psido_study(m1, [0.2, 0.1, 0.05], orders=(1,), checks=("quantization", "calderon_vaillancourt"))
    assert read_report(emit_report(rep, tmp_path)).rows == rep.rows


def test_empty_report_header_only(tmp_path):
    path = emit_report([], tmp_path)
    assert path.read_text() == ",".join(COLUMNS["converge"]) + "\n"
    path = emit_report([], tmp_path, "defects")
    assert path.read_text() == "eps,kind,norm\n"


def test_seventeen_digits(tmp_path, m1):
    rep = convergence_study(m1, 1, [0.04, 0.02, 0.01, 0.005], 3.0)
    line = emit_report(rep, tmp_path).read_text().splitlines()[1]
    assert float(line.split(",")[2]) == rep.rows[0][2]


def test_emit_requires_directory(tmp_path, m1):
    with pytest.raises(FileNotFoundError):
        emit_report(validate_hypotheses(m1), tmp_path / "missing")


def test_unknown_report_type(tmp_path):
    with pytest.raises(TypeError):
        emit_report(object(), tmp_path)


# ----------------------------------------------------------------------------
# configuration


def _write(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else yaml.safe_dump(doc))
    return path


def test_parse_error_has_line(tmp_path):
    with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
        load_config(_write(tmp_path, "model: M1\neps: [0.1, 0.2\n"))


def test_model_errors_name_field():
    with pytest.raises(ConfigError, match="field 'model'"):
        config_from_mapping({"model": "M9"})
    with pytest.raises(ConfigError, match="field 'model'"):
        config_from_mapping({"eps": 0.1})


@pytest.mark.parametrize("eps", [[0.1, 0.1], [0.1, -0.2], ["a"], None])
def test_eps_validation(eps):
    cfg = config_from_mapping({"model": "M1", "eps": eps})
    with pytest.raises(ConfigError, match="eps"):
        cfg.eps_list()


def test_unknown_command_in_config():
    with pytest.raises(ConfigError, match="command"):
        config_from_mapping({"model": "M1", "command": "fly"})


# ----------------------------------------------------------------------------
# commands


def _run(tmp_path, doc, command, *extra):
    cfg = _write(tmp_path, doc)
    out = tmp_path / "out"
    status = main(["--config", str(cfg), "--out", str(out), "--command", command, *extra])
    summary = (out / "summary.txt").read_text() if (out / "summary.txt").exists() else ""
    return status, out, summary


def test_cli_converge(tmp_path):
    doc = {"model": "M1", "eps": [0.04, 0.02, 0.01, 0.005], "k": 4, "half_width": 3.0}
    status, out, summary = _run(tmp_path, doc, "converge")
    assert status == 0
    assert len((out / "converge.csv").read_text().splitlines()) == 17
    assert sum(1 for line in summary.splitlines() if line.startswith("PASS slope")) == 4


def test_cli_converge_fails_on_threshold(tmp_path):
    doc = {"model": "M1", "eps": [0.04, 0.02, 0.01, 0.005], "k": 2, "half_width": 3.0, "assertions": {"min_slope": 2.5}}
    status, _, summary = _run(tmp_path, doc, "converge")
    assert status == 1
    assert "FAIL slope k=1" in summary


def test_cli_harmonic_m2(tmp_path):
    status, out, summary = _run(tmp_path, {"model": "M2", "n_max": 3}, "harmonic")
    assert status == 0
    levels = read_report(out / "harmonic.csv")
    np.testing.assert_allclose([lv.value for lv in levels], [2.6131259, 4.1438597, 5.6745934], atol=1e-6)


def test_cli_harmonic_expected_levels(tmp_path):
    doc = {"model": "M1", "n_max": 4, "assertions": {"expected_levels": [2, 2, 6, 6]}}
    assert _run(tmp_path, doc, "harmonic")[0] == 0


def test_cli_validate_sign_violation(tmp_path):
    doc = {
        "model": {
            "dimension": 1,
            "hopping": [{"offset": [0], "a0": 2.0}, {"offset": [1], "a0": 1.0}, {"offset": [-1], "a0": -1.0}],
            "V0": {"terms": [{"coef": 1.0, "powers": [2]}]},
            "wells": [[0.0]],
        }
    }
    status, _, summary = _run(tmp_path, doc, "validate")
    assert status != 0
    assert "FAIL clause (a)(ii)" in summary


def test_cli_refuses_invalid_model_for_other_commands(tmp_path):
    doc = {
        "model": {
            "dimension": 1,
            "hopping": [{"offset": [0], "a0": 2.0}, {"offset": [1], "a0": 1.0}, {"offset": [-1], "a0": -1.0}],
            "V0": {"terms": [{"coef": 1.0, "powers": [2]}]},
            "wells": [[0.0]],
        },
        "eps": 0.1,
    }
    status, _, summary = _run(tmp_path, doc, "spectrum")
    assert status == 1
    assert "(a)(ii)" in summary


def test_cli_spectrum_and_persson(tmp_path):
    status, out, _ = _run(tmp_path, {"model": "M1", "eps": 0.05, "k": 4, "half_width": 3.0}, "spectrum")
    assert status == 0
    assert len(read_report(out / "spectrum.csv").eigenvalues) == 4
    doc = {"model": "M1", "eps": 0.05, "radius": 0.5, "centers": [[3.0], [-3.0]], "assertions": {"min_value": 27.5}}
    assert _run(tmp_path, doc, "persson")[0] == 0


def test_cli_quasimode_and_defects(tmp_path):
    doc = {"model": "M1", "eps": [0.04, 0.02, 0.01], "half_width": 3.0}
    status, out, summary = _run(tmp_path, doc, "quasimode")
    assert status == 0 and "rayleigh slope" in summary
    doc = {"model": "M1", "eps": [0.1, 0.05, 0.025], "kinds": ["microlocal"]}
    assert _run(tmp_path, doc, "defects")[0] == 0
    doc["kinds"] = ["nonsense"]
    assert _run(tmp_path, doc, "defects")[0] == 2


def test_cli_psido(tmp_path):
    doc = {"model": "M1", "eps": [0.2, 0.1, 0.05, 0.025]}
    status, out, summary = _run(tmp_path, doc, "psido-check")
    assert status == 0, summary
    assert (out / "psido.csv").exists()


def test_cli_config_error_status(tmp_path):
    assert _run(tmp_path, "model: [M1\n", "validate")[0] == 2
    assert _run(tmp_path, {"model": "M1"}, "converge")[0] == 2


def test_cli_module_error_status(tmp_path):
    # a ball holding a single site is a computation error, forwarded as status 3
    doc = {"model": "M1", "eps": 0.5, "radius": 0.1, "centers": [[3.0]]}
    assert _run(tmp_path, doc, "persson")[0] == 3


def test_cli_byte_identical(tmp_path):
    doc = {"model": "M2", "eps": [0.2, 0.1, 0.05, 0.025], "k": 3, "half_width": 2.0}
    cfg = _write(tmp_path, doc)
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--config", str(cfg), "--out", str(out), "--command", "converge", "--seed", "7"]) == 0
        outputs.append(((out / "converge.csv").read_bytes(), (out / "summary.txt").read_bytes()))
    assert outputs[0] == outputs[1]


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {"model": "M1", "command": "validate"})
    proc = subprocess.run(
        [sys.executable, "-m", "latharm", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "result: PASS" in proc.stdout
