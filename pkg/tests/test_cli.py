import json

from qlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_specialization(capsys):
    code, out, _ = run(capsys, "verify", "fine-12.2@a=0,b=-1,t=-1", "--order", "200")
    assert code == 0
    assert "match" in out and "1/1 ok" in out


def test_verify_printed_entry_that_fails(capsys):
    code, out, _ = run(capsys, "verify", "thm-mock-B-M1", "--order", "100")
    assert code == 1
    assert "mismatch" in out and "first mismatch q^" in out


def test_verify_json(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, _ = run(capsys, "verify", "rogers-1", "--order", "60", "--json", str(path))
    assert code == 0
    (record,) = json.loads(path.read_text())
    assert record["id"] == "rogers-1" and record["status"] == "match"


def test_verify_needs_targets(capsys):
    code, _, err = run(capsys, "verify")
    assert code == 2 and "give identity ids" in err


def test_table_sigma(capsys):
    code, out, _ = run(capsys, "table", "sigma", "--order", "58")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "k,exp_num,exp_den,coeff_num,coeff_den"
    assert "55,55,1,2,1" in lines and "57,57,1,1,1" in lines


def test_table_to_file(capsys, tmp_path):
    path = tmp_path / "f.csv"
    assert run(capsys, "table", "f", "--order", "101", "--csv", str(path))[0] == 0
    assert "100,100,1,-18520,1" in path.read_text().splitlines()


def test_renorm_exit_codes(capsys):
    code, out, _ = run(capsys, "renorm", "f", "--order", "50")
    assert code == 0 and json.loads(out)["residual_zero"] is True
    assert run(capsys, "renorm", "M1", "--order", "50")[0] == 1
    assert run(capsys, "renorm", "M1", "--order", "50", "--alternate", "negated")[0] == 0


def test_eval_root(capsys):
    code, out, _ = run(capsys, "eval-root", "sigma", "--num", "0", "--den", "1")
    record = json.loads(out)
    assert code == 0 and record["verdict"] == "finite"
    assert record["value"]["b"] == 1
    code, out, _ = run(capsys, "eval-root", "M1", "--num", "1", "--den", "2")
    assert code == 0 and json.loads(out)["verdict"] == "pole"


def test_probe_cocycle(capsys, tmp_path):
    code, out, _ = run(capsys, "probe", "cocycle", "--bound", "4")
    assert code == 0 and json.loads(out)["branch"] == "principal"
    path = tmp_path / "c.json"
    assert run(capsys, "probe", "cocycle", "--bound", "4", "--json", str(path))[0] == 0
    assert json.loads(path.read_text())["samples"]


def test_cache_build_and_clear(capsys, tmp_path):
    code, out, _ = run(capsys, "cache", "--dir", str(tmp_path), "--build", "sigma", "--order", "40")
    assert code == 0 and "cached sigma to q^40" in out and "1 entries" in out
    code, out, _ = run(capsys, "cache", "--dir", str(tmp_path), "--clear")
    assert code == 0 and "removed 1 entries" in out


def test_errors_exit_2(capsys):
    assert run(capsys, "verify", "no-such-identity")[0] == 2
    assert run(capsys, "table", "no_such_series", "--order", "5")[0] == 2
    assert run(capsys, "renorm", "W", "--order", "5")[0] == 2
    assert run(capsys, "eval-root", "f", "--num", "1", "--den", "3")[0] == 2
    assert run(capsys, "probe", "cocycle", "--bound", "1")[0] == 2
