import json
import math
from pathlib import Path

import pytest

from entropic.cli import DEFAULT_TOL, SCHEMAS, main, run, validate
from entropic.errors import ConfigInvalid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

ROTOR = {"kind": "markov", "builtin": "rotor", "q": [0.5, 0.3, 0.2],
         "alpha": {"start": -0.5, "stop": 1.5, "num": 21}, "n": 20, "samples": 1_000_000, "seed": 5}
GAS = {"kind": "gas", "N": 4, "eps": 1.0, "F": 0.5, "alpha": {"start": -1, "stop": 2, "num": 13},
       "t": [1, 5], "t_long": 200, "samples": 200_000, "seed": 7}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_verdict(out):
    return json.loads((Path(out) / "verdict.json").read_text())


# ---------------------------------------------------------------------------
# Validation


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_validate(name):
    assert validate(json.loads((CONFIGS / name).read_text())) == []


def test_unknown_key_is_rejected(tmp_path, capsys):
    path = write(tmp_path, {**ROTOR, "bogus": 1})
    assert main(["validate", path]) == 2
    assert "bogus" in capsys.readouterr().out
    assert main(["markov", path]) == 2


def test_empty_alpha_grid_is_rejected(tmp_path):
    assert main(["markov", write(tmp_path, {**ROTOR, "alpha": []})]) == 2
    findings = validate({**ROTOR, "alpha": {"start": 0, "stop": 1, "num": 0}})
    assert findings


def test_negative_sample_count_is_a_finding():
    findings = validate({**ROTOR, "samples": -5})
    assert any(f.startswith("samples") for f in findings)


def test_not_in_o_beta_reports_eigenvalue():
    cfg = {"kind": "chain", "n": 10, "m": 2, "beta": 1.0, "X": [1.5, 0.0]}
    (finding,) = validate(cfg)
    assert finding.startswith("NotInOBeta")
    assert float(finding.rsplit(" ", 1)[1]) < 0


def test_markov_structure_findings():
    assert validate({"kind": "markov"}) == ["markov: give exactly one of P or builtin"]
    assert validate({"kind": "markov", "P": [[0.5, 0.4], [0.5, 0.5]]}) == ["P: rows must sum to 1"]
    assert validate({**ROTOR, "q": [0.5, 0.5, 0.5]}) == ["q: must sum to 1"]


def test_unknown_kind_and_unreadable_file(tmp_path):
    assert validate({"kind": "nope"})
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_kind_mismatch(tmp_path):
    assert main(["gas", write(tmp_path, ROTOR)]) == 2


def test_schema_command(capsys):
    assert main(["schema", "chain"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert schema == SCHEMAS["chain"]
    assert schema["additionalProperties"] is False


# ---------------------------------------------------------------------------
# Runs and bundles


def test_markov_bundle(tmp_path):
    out = tmp_path / "out"
    assert main(["markov", write(tmp_path, ROTOR), "--out", str(out)]) == 0
    verdict = read_verdict(out)
    assert list(verdict) == ["kind", "seed", "passed", "checks"]
    assert verdict["passed"] and verdict["seed"] == 5
    assert set(verdict["checks"][0]) == {"name", "anchor", "passed", "residual", "tolerance",
                                         "relation", "mandatory"}
    header, row = (out / "ep_rate.csv").read_text().splitlines()
    assert header == "sigma_mean,ks_entropy,detailed_balance"
    assert float(row.split(",")[0]) == pytest.approx(0.4 * math.log(3), abs=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["kind"] == "markov"
    assert "e" in manifest["tables"] and "rate" in manifest["tables"]


def test_reruns_are_byte_identical(tmp_path):
    path = write(tmp_path, ROTOR)
    for name in ("a", "b"):
        assert main(["markov", path, "--out", str(tmp_path / name)]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "out"
    main(["markov", write(tmp_path, ROTOR), "--out", str(out), "--seed", "9"])
    assert read_verdict(out)["seed"] == 9


def test_gas_bundle(tmp_path):
    out = tmp_path / "gas"
    assert run(GAS, out=str(out)) == 0
    checks = {c["name"]: c for c in read_verdict(out)["checks"]}
    assert checks["GC symmetry of e_plus fails"]["relation"] == ">"
    assert all(c["passed"] for c in checks.values())
    assert (out / "e_t.csv").read_text().startswith("t,alpha,e_t\n")


def test_tolerance_override_flips_verdict(tmp_path):
    path = write(tmp_path, {**ROTOR, "samples": 0})
    assert main(["markov", path, "--out", str(tmp_path / "o"), "--tol", "enumeration=1e-30"]) == 1
    assert not read_verdict(tmp_path / "o")["passed"]
    assert main(["markov", path, "--out", str(tmp_path / "o"), "--tol", "enumeration=-1"]) == 2
    with pytest.raises(ConfigInvalid):
        run({**ROTOR, "samples": 0}, out=str(tmp_path / "o"), tol_overrides={"nonsense": 1.0})


def test_informational_checks_do_not_gate(tmp_path):
    from entropic.cli import Bundle

    b = Bundle(dict(DEFAULT_TOL))
    b.check("mandatory", "x", 0.0, "symmetry")
    b.check("info", "y", 1.0, "symmetry", info=True)
    assert b.verdict()
    b.check("gap", "z", 0.0, "control_gap", relation=">")
    assert not b.verdict()
