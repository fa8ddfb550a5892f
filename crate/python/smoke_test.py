#!/usr/bin/env python3
"""Smoke test for the pretangent_py extension module.

Locates the cdylib built by `cargo build -p pretangent-py`, imports it from
a scratch directory, and exercises each exposed entry point once. Exits
nonzero on the first failure.
"""

import json
import math
import pathlib
import shutil
import sys
import sysconfig
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def locate_cdylib() -> pathlib.Path:
    candidates = [
        REPO / "target" / profile / "libpretangent_py.so"
        for profile in ("release", "debug")
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit(
        "libpretangent_py.so not found; run `cargo build -p pretangent-py` first"
    )


def import_module(scratch: pathlib.Path):
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(locate_cdylib(), scratch / f"pretangent_py{suffix}")
    sys.path.insert(0, str(scratch))
    import pretangent_py

    return pretangent_py


def write(scratch: pathlib.Path, name: str, payload) -> str:
    path = scratch / name
    path.write_text(json.dumps(payload))
    return str(path)


def check_space(pt):
    plane = pt.Space.euclidean(2)
    assert plane.dist([0.0, 0.0], [3.0, 4.0]) == 5.0
    assert plane.validate(samples=100, seed=1)
    assert "euclidean(2)" in repr(plane)

    finite = pt.Space.finite([[0.0, 1.0], [1.0, 0.0]])
    assert finite.dist(0, 1) == 1.0
    assert finite.validate()
    print("ok space: distances and validation")


def check_estimate_limit(pt):
    converging = [2.0 + 0.5 ** j for j in range(1, 25)]
    verdict = pt.estimate_limit(converging)
    assert verdict["status"] == "Converged", verdict
    assert math.isclose(verdict["value"], 2.0, abs_tol=1e-6), verdict

    diverging = [float(2 ** j) for j in range(1, 25)]
    assert pt.estimate_limit(diverging)["status"] == "Diverged"
    print("ok estimate_limit: converging and diverging tails")


def check_tangency(pt, scratch: pathlib.Path):
    space = write(scratch, "space.json", {"kind": "euclidean", "dim": 2})
    circle = write(
        scratch,
        "circle.json",
        {"kind": "circle", "center": [0.0, 0.0], "radius": 1.0},
    )
    line = write(
        scratch,
        "line.json",
        {"kind": "line", "point": [1.0, 0.0], "dir": [0.0, 1.0], "span": 2.0},
    )
    point = write(scratch, "point.json", [1.0, 0.0])

    kwargs = dict(
        t0=0.1, grid_len=8, n_sphere=48, n_target=256, seed=3
    )
    report_text, csv_text = pt.tangency(space, circle, line, point, **kwargs)
    again_text, again_csv = pt.tangency(space, circle, line, point, **kwargs)
    assert report_text == again_text, "tangency report not deterministic"
    assert csv_text == again_csv, "tangency CSV not deterministic"

    report = json.loads(report_text)
    assert report["tool"] == "pretangent"
    kind = report["payload"]["verdict"]["kind"]
    assert kind == "StronglyTangentEquivalent", kind
    header = csv_text.splitlines()[0]
    assert header == "t,eps_zy,eps_yz,eps_min,ratio,empty_flag", header
    assert len(csv_text.splitlines()) == 1 + kwargs["grid_len"]
    print(f"ok tangency: {kind}, deterministic report and CSV")

    try:
        pt.tangency(str(scratch / "missing.json"), circle, line, point)
    except ValueError as e:
        assert "missing.json" in str(e), e
    else:
        sys.exit("expected ValueError for a missing config file")
    print("ok tangency: missing config raises ValueError")


def check_analyze(pt, scratch: pathlib.Path):
    space = write(scratch, "a_space.json", {"kind": "euclidean", "dim": 2})
    norm = write(scratch, "a_norm.json", {"kind": "power", "c": 1.0, "p": 1.0})
    sequences = write(
        scratch,
        "a_sequences.json",
        {
            "base": [0.0, 0.0],
            "sequences": [
                {
                    "label": "east",
                    "seq": {"kind": "power", "dir": [1.0, 0.0], "c": 1.0, "p": 1.0},
                },
                {
                    "label": "north",
                    "seq": {"kind": "power", "dir": [0.0, 1.0], "c": 2.0, "p": 1.0},
                },
            ],
        },
    )
    report = json.loads(pt.analyze(space, sequences, norm, seed=2))
    labels = report["payload"]["family"]["labels"]
    assert labels[0] == "base", labels
    assert {"east", "north"} <= set(labels), labels
    classes = report["payload"]["classes"]
    assert len(classes) == 3, classes
    print(f"ok analyze: {len(labels)} members in {len(classes)} classes")


def check_gallery(pt):
    report_text, summary = pt.gallery(
        "curve", grid_len=8, n_sphere=48, n_target=256, seed=3
    )
    report = json.loads(report_text)
    assert report["command"] == "gallery"
    row = summary.splitlines()[1]
    assert row.startswith("curve,"), row
    print(f"ok gallery: {row}")


def check_validate(pt, scratch: pathlib.Path):
    bad = write(
        scratch,
        "bad_space.json",
        {"kind": "finite", "matrix": [[0.0, 1.0], [2.0, 0.0]]},
    )
    try:
        pt.validate(bad)
    except ValueError as e:
        assert "symm" in str(e).lower(), e
    else:
        sys.exit("expected ValueError for an asymmetric matrix")

    good = write(scratch, "good_space.json", {"kind": "euclidean", "dim": 3})
    report = json.loads(pt.validate(good, samples=120, seed=4))
    assert report["payload"]["validation"]["pass"] is True
    print("ok validate: axioms checked, asymmetric matrix rejected")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        scratch = pathlib.Path(tmp)
        pt = import_module(scratch)
        print(f"imported pretangent_py {pt.__version__}")
        check_space(pt)
        check_estimate_limit(pt)
        check_tangency(pt, scratch)
        check_analyze(pt, scratch)
        check_gallery(pt)
        check_validate(pt, scratch)
    print("smoke test passed")


if __name__ == "__main__":
    main()
