#!/usr/bin/env python3
"""End-to-end checks of the odinctl binary: exit codes, error JSON, artifact
layout, byte-identical reruns and the report schema.

usage: cli_test.py <odinctl> <source dir>
"""

import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

import jsonschema

ODINCTL = sys.argv[1]
SOURCE = pathlib.Path(sys.argv[2])
SMOKE = SOURCE / "configs" / "smoke.ini"
SCHEMA = json.loads((SOURCE / "schema" / "report.schema.json").read_text())

failures = []


def run(*args):
    return subprocess.run([ODINCTL, *map(str, args)], capture_output=True, text=True)


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def error_json(proc):
    try:
        return json.loads(proc.stderr.strip().splitlines()[-1])
    except (ValueError, IndexError):
        return {}


def provenance_ok(path, config_hash, seed):
    first = path.read_text().splitlines()[0]
    return first.startswith(f"# config_hash={config_hash} seed={seed}")


def main():
    tmp = pathlib.Path(tempfile.mkdtemp(prefix="odinctl-cli-"))
    try:
        # usage errors
        check(run().returncode == 1, "no subcommand exits 1")
        check(run("train", "--bogus").returncode == 1, "unknown flag exits 1")
        check(run("eval").returncode == 1, "missing checkpoint argument exits 1")

        bad = tmp / "bad.ini"
        bad.write_text("[bench]\nid_classes = 0\n")
        p = run("train", "-c", bad, "-o", tmp / "runs")
        err = error_json(p)
        check(p.returncode == 1, "invalid config exits 1")
        check(err.get("error") == "invalid_config" and err.get("field") == "bench",
              "invalid config reports JSON with the field")

        unknown = tmp / "unknown.ini"
        unknown.write_text("[model]\nwidth = 3\n")
        p = run("train", "-c", unknown, "-o", tmp / "runs")
        check(p.returncode == 1 and error_json(p).get("field") == "model.width",
              "unknown key exits 1 naming the key")

        p = run("sweep", "-c", SMOKE, "--axis", "dropout", "--grid", "0,abc", "-o", tmp / "runs")
        check(p.returncode == 1, "malformed sweep grid exits 1")
        p = run("sweep", "-c", SMOKE, "--axis", "depth", "--grid", "1", "-o", tmp / "runs")
        check(p.returncode == 1, "unknown sweep axis exits 1")

        # runtime failures
        junk = tmp / "junk.json"
        junk.write_text('{"format": "something-else"}')
        p = run("eval", junk, "-o", tmp / "runs")
        check(p.returncode == 2 and error_json(p).get("error") == "checkpoint",
              "foreign checkpoint exits 2")
        p = run("eval", tmp / "missing.json", "-o", tmp / "runs")
        check(p.returncode == 2, "missing checkpoint exits 2")

        # train twice, eval twice
        runs = tmp / "runs"
        ckpts = []
        for name in ("a", "b"):
            p = run("train", "-c", SMOKE, "-o", runs, "--run-name", name)
            check(p.returncode == 0, f"train {name} exits 0")
            ckpts.append(pathlib.Path(p.stdout.strip()))
        check(ckpts[0].read_bytes() == ckpts[1].read_bytes(), "checkpoints are byte-identical")
        p = run("train", "-c", SMOKE, "-o", runs, "--run-name", "a")
        check(p.returncode == 2, "existing run directory is never overwritten")

        ckpt = json.loads(ckpts[0].read_text())
        h, seed = ckpt["config_hash"], ckpt["seed"]
        check(ckpt["format"] == "godin-checkpoint" and ckpt["version"] == 1, "checkpoint header")
        check(provenance_ok(ckpts[0].parent / "history.csv", h, seed), "history.csv provenance")
        check(json.loads((ckpts[0].parent / "config.json").read_text())["config_hash"] == h,
              "config snapshot hash")

        reports = []
        for name in ("ea", "eb"):
            p = run("eval", ckpts[0], "-o", runs, "--run-name", name)
            check(p.returncode == 0, f"eval {name} exits 0")
            reports.append(pathlib.Path(p.stdout.strip()))
        check(reports[0].read_bytes() == reports[1].read_bytes(), "reports are byte-identical")

        report = json.loads(reports[0].read_text())
        try:
            jsonschema.validate(report, SCHEMA)
            check(True, "report validates against the schema")
        except jsonschema.ValidationError as e:
            check(False, f"report validates against the schema: {e.message}")
        check(report["config_hash"] == h and report["seed"] == seed, "report provenance")
        check(len(report["entries"]) == 25, "5 score functions x 5 OoD sets")
        for csv in sorted(reports[0].parent.glob("*.csv")):
            check(provenance_ok(csv, h, seed), f"{csv.name} provenance")

        p = run("report", reports[0], "--verify")
        check(p.returncode == 0 and "MISMATCH" not in p.stdout, "report --verify passes")

        p = run("eval", ckpts[0], "-o", runs, "--run-name", "plain", "--no-preprocess",
                "--scores", "baseline,deconf-h")
        plain = json.loads(pathlib.Path(p.stdout.strip()).read_text())
        check(p.returncode == 0 and plain["plain"] is True and len(plain["entries"]) == 10,
              "plain eval with a score subset")
        check(all(e["epsilon"] == 0 for e in plain["entries"]), "plain eval has epsilon 0")
        p = run("eval", ckpts[0], "-o", runs, "--scores", "energy")
        check(p.returncode == 1, "unknown score function exits 1")

        # the checkpoint and the snapshot both work as configs
        data = tmp / "data.csv"
        p = run("gen-data", "-c", ckpts[0].parent / "config.json", "--out", data)
        check(p.returncode == 0 and provenance_ok(data, h, seed), "gen-data from a snapshot")
        check(run("gen-data", "-c", SMOKE, "--out", data).returncode == 2, "gen-data never overwrites")

        p = run("sweep", "-c", SMOKE, "--axis", "head_variant", "--grid", "PlainI,C",
                "-o", runs, "--run-name", "sweep")
        check(p.returncode == 0, "sweep exits 0")
        rows = [l for l in pathlib.Path(p.stdout.strip()).read_text().splitlines()
                if l and not l.startswith("#")]
        check(len(rows) == 3 and rows[1].split(",")[5] == "partial" and rows[2].split(",")[5] == "ok",
              "sweep summary rows and status")
    finally:
        shutil.rmtree(tmp, ignore_errors=True)

    print(f"{len(failures)} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
