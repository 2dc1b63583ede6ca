"""Runs the command-line pipeline end to end inside the test process."""

from __future__ import annotations

import json
from pathlib import Path

from cfaudit.cli import main


def run(*argv) -> None:
    code = main([str(a) for a in argv])
    if code != 0:
        raise RuntimeError(f"cfaudit {' '.join(map(str, argv))} exited with {code}")


def run_pipeline(work, n: int = 6000, seed: int = 7, codec_config: dict | None = None,
                 clf_config: dict | None = None, mitigation_config: dict | None = None,
                 sweep_rows: int = 30, max_accuracy_drop: float = 0.02) -> Path:
    """gen-data -> fit-scm -> train-codec -> train-clf -> cf -> audit -> sweep -> mitigate -> audit."""
    w = Path(work)
    w.mkdir(parents=True, exist_ok=True)
    configs = {}
    for name, doc in (("codec", codec_config), ("clf", clf_config), ("mitigation", mitigation_config)):
        if doc is not None:
            path = w / f"{name}_config.json"
            path.write_text(json.dumps(doc))
            configs[name] = ["--config", path]
        else:
            configs[name] = []
    data, scm = w / "data", w / "scm.json"
    run("gen-data", "--n", n, "--seed", seed, "--out", data)
    run("fit-scm", "--data", data, "--out", scm)
    run("train-codec", "--data", data, "--split", "train", "--quiet", "--out", w / "codec", *configs["codec"])
    run("train-clf", "--data", data, "--out", w / "clf", *configs["clf"])
    common = ["--data", data, "--codec", w / "codec", "--scm", scm, "--filter-redundant"]
    run("cf", *common, "--split", "test", "--do", "i=1.0", "--out", w / "pairs_i")
    run("cf", *common, "--split", "test", *sum((["--do", f"l={k}"] for k in range(4)), []), "--out", w / "pairs_l")
    run("cf", *common, "--split", "train", "--do", "i=1.0", "--out", w / "pairs_fit")
    run("audit", "--clf", w / "clf", "--pairs", w / "pairs_i", "--out", w / "audit_i")
    run("audit", "--clf", w / "clf", "--pairs", w / "pairs_l", "--out", w / "audit_l")
    run("audit", "--clf", w / "clf", "--baseline", "flip", "--data", data, "--split", "test", "--out", w / "audit_flip")
    run("audit", "--clf", w / "clf", "--baseline", "brightness=1.25", "--data", data, "--split", "test",
        "--out", w / "audit_brightness")
    for a in "tis":
        run("sweep", "--data", data, "--codec", w / "codec", "--scm", scm, "--attribute", a, "--split", "test",
            "--rows", sweep_rows, "--out", w / f"sweep_{a}")
    run("mitigate", "--data", data, "--clf", w / "clf", "--pairs", w / "pairs_fit", "--lambda", 1.0,
        "--max-accuracy-drop", max_accuracy_drop, "--out", w / "mitigated", *configs["mitigation"])
    run("audit", "--clf", w / "mitigated", "--pairs", w / "pairs_i", "--out", w / "audit_mitigated")
    return w


def tree_bytes(root) -> dict:
    """Relative path -> file bytes for every file below ``root``."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
