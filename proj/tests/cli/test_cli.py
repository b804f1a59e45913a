"""Contract tests for the sieve-scr command-line tool."""

import csv
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

BINARY = Path(sys.argv[1])
SCHEMAS = Path(sys.argv[2])
failures = []


def check(cond, message):
    if not cond:
        failures.append(message)
        print("FAILED:", message)


def run(*args, env=None, expect=0):
    full_env = dict(os.environ)
    full_env.pop("SIEVE_SCR_SEED", None)
    full_env.update(env or {})
    proc = subprocess.run([str(BINARY), *args], capture_output=True, text=True, env=full_env)
    check(proc.returncode == expect, f"{args[0]}: exit {proc.returncode}, expected {expect}: {proc.stderr.strip()}")
    return proc


def validate(name, path):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    doc = json.loads(Path(path).read_text()) if not isinstance(path, dict) else path
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        check(False, f"{name} does not match its schema: {e.message}")
    return doc


def error_of(proc):
    doc = json.loads(proc.stderr.strip().splitlines()[-1])
    validate("error", doc)
    return doc["error"]


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    run("simulate", "--model", "Q1", "--n", "100", "--out", str(tmp / "sim100"))
    with open(tmp / "sim100" / "dataset.csv") as f:
        rows = list(csv.reader(f))
    check(rows[0] == ["x1", "x2", "y"], "simulate header")
    check(len(rows) == 101, f"simulate wrote {len(rows) - 1} rows, expected 100")
    validate("simulate", tmp / "sim100" / "simulate.json")

    run("simulate", "--model", "Q2", "--n", "400", "--seed", "3", "--out", str(tmp / "sim"))
    data = str(tmp / "sim" / "dataset.csv")

    out = tmp / "scr"
    run("scr", "--data", data, "--loss", "quantile:0.5", "--k", "3,3", "--B", "100", "--grid", "9x7",
        "--out", str(out))
    for artifact in ("scr.csv", "result.json", "plot.dat"):
        check((out / artifact).exists(), f"scr did not write {artifact}")
    with open(out / "scr.csv") as f:
        rows = list(csv.reader(f))
    check(rows[0] == ["x1", "x2", "center", "lower", "upper"], "scr.csv header")
    check(len(rows) - 1 == 63, f"scr.csv has {len(rows) - 1} rows, expected 63")
    check(all(float(r[3]) <= float(r[2]) <= float(r[4]) for r in rows[1:]), "scr.csv band ordering")
    lines = (out / "plot.dat").read_text().splitlines()
    check(lines[0].startswith("#") and not any(l.startswith("#") for l in lines[1:]), "plot.dat header line")
    check(len(lines) == 64 and all(len(l.split()) == 5 for l in lines[1:]), "plot.dat columns")
    result = validate("scr", out / "result.json")
    check(result["M"] >= 6 * 9, "automatic block length respects the floor")

    run("scr", "--data", data, "--k", "3,3", "--B", "50", "--grid", "5x5", "--out", str(tmp / "scr_b"))
    run("scr", "--data", data, "--k", "3,3", "--B", "50", "--grid", "5x5", "--out", str(tmp / "scr_c"))
    check((tmp / "scr_b" / "result.json").read_bytes() == (tmp / "scr_c" / "result.json").read_bytes(),
          "scr rerun is byte-identical")

    run("fit", "--data", data, "--k", "4,3", "--out", str(tmp / "fit"))
    validate("fit", tmp / "fit" / "fit.json")
    run("fit", "--data", data, "--candidates", "2,3", "--out", str(tmp / "fit_auto"))
    fit_auto = validate("fit", tmp / "fit_auto" / "fit.json")
    check(len(fit_auto["k_selection"]["candidates"]) == 4, "fit auto k lists 4 candidates")

    run("test", "--data", data, "--k", "3,3", "--B", "99", "--grid", "9x9", "--out", str(tmp / "test"))
    t = validate("test", tmp / "test" / "test.json")
    check(0 < t["p_value"] <= 1, "test p-value range")
    run("test", "--data", data, "--k", "3,3", "--B", "99", "--grid", "9x9", "--null", "keep:1",
        "--out", str(tmp / "test_keep"))
    validate("test", tmp / "test_keep" / "test.json")

    run("select-k", "--data", data, "--out", str(tmp / "sk"))
    sk = validate("select-k", tmp / "sk" / "select_k.json")
    check(sk["validation_length"] == 25, "validation length floor(3 log2 400) = 25")

    run("select-block", "--data", data, "--k", "3,4", "--out", str(tmp / "sb"))
    sb = validate("select-block", tmp / "sb" / "select_block.json")
    check(len(sb["per_coordinate"]) == 12, "select-block reports K coordinate entries")

    run("coverage", "--n", "200", "--replications", "3", "--B", "50", "--k", "3,3", "--grid", "7x7",
        "--loss", "ls,quantile:0.5", "--alpha", "0.05,0.1", "--out", str(tmp / "cov"))
    cov = validate("coverage", tmp / "cov" / "coverage.json")
    with open(tmp / "cov" / "coverage.csv") as f:
        rows = list(csv.reader(f))
    check(len(rows) - 1 == 4 and len(cov["rows"]) == 4, "coverage has one row per (loss, alpha)")
    log = (tmp / "cov" / "replications.jsonl").read_text().splitlines()
    check(len(log) == 6, "replication log has one line per (replication, loss)")

    # Config file with flag overrides: flags win.
    cfg = tmp / "cfg.json"
    cfg.write_text(json.dumps({"command": "simulate", "model": "Q2", "n": 50, "seed": 9}))
    run("simulate", "--config", str(cfg), "--n", "30", "--out", str(tmp / "cfgsim"))
    sim = json.loads((tmp / "cfgsim" / "simulate.json").read_text())
    check(sim["n"] == 30 and sim["model"] == "Q2" and sim["seed"] == 9, "config values with flag override")

    # Seed precedence: config < SIEVE_SCR_SEED < --seed.
    run("simulate", "--config", str(cfg), "--out", str(tmp / "envsim"), env={"SIEVE_SCR_SEED": "17"})
    check(json.loads((tmp / "envsim" / "simulate.json").read_text())["seed"] == 17, "env seed overrides config")
    run("simulate", "--seed", "5", "--out", str(tmp / "flagsim"), env={"SIEVE_SCR_SEED": "17"})
    check(json.loads((tmp / "flagsim" / "simulate.json").read_text())["seed"] == 5, "seed flag wins over env")

    # Error contract.
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"data": data, "bandwidth": 3}))
    e = error_of(run("scr", "--config", str(bad), "--out", str(tmp / "bad"), expect=2))
    check(e.get("key") == "bandwidth", "unknown config key is named")
    e = error_of(run("scr", "--data", data, "--alpha", "1.5", "--out", str(tmp / "bad"), expect=2))
    check(e.get("key") == "alpha", "invalid alpha is named")
    e = error_of(run("scr", "--data", data, "--basis", "trig", "--k", "4,3", "--out", str(tmp / "bad"), expect=2))
    check(e.get("key") == "k", "invalid k is named")
    e = error_of(run("scr", "--data", data, "--grid", "9", "--out", str(tmp / "bad"), expect=2))
    check(e.get("key") == "grid", "grid of wrong dimension is named")
    cfg.write_text("{not json")
    check(error_of(run("simulate", "--config", str(cfg), expect=2)).get("key") == "config", "malformed config file")
    error_of(run("fit", "--data", str(tmp / "missing.csv"), expect=3))
    broken = tmp / "broken.csv"
    broken.write_text("x1,y\n0.1,1\n0.2,abc\n")
    e = error_of(run("fit", "--data", str(broken), expect=3))
    check(e.get("row") == 2 and e.get("column") == "y", "data error names row and column")
    e = error_of(run("scr", "--data", data, "--k", "5,5", "--M", "20", "--B", "10", "--out", str(tmp / "bad"),
                     expect=4))
    check(e.get("kind") == "numeric", "singular block design is a numeric failure")

if failures:
    print(f"{len(failures)} CLI contract check(s) failed")
    sys.exit(1)
print("all CLI contract checks passed")
