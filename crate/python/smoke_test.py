"""Smoke test for the Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import json
import math
import sys
import tempfile
from pathlib import Path

import degenctl_py as dc

SCENARIO = {
    "form": "non_divergence",
    "coefficient": {"type": "power", "alpha": 0.5},
    "omega": [0.3, 0.8],
    "T": 1.0,
    "n": 32,
    "m": 48,
}


def main() -> int:
    text = json.dumps(SCENARIO)

    report = dc.validate(text)
    assert report["passed"], report

    bad = dict(SCENARIO, coefficient={"type": "power", "alpha": 2.0})
    assert not dc.validate(json.dumps(bad))["passed"]

    out = dc.control(text)
    summary = out["summary"]
    assert out["passed"] and summary["final_ratio"] <= 1e-2, summary
    assert len(out["control"]) == SCENARIO["m"] + 1
    assert len(out["control"][0]) == SCENARIO["n"] + 1
    assert all(math.isfinite(v) for row in out["state"] for v in row)

    kernel = dict(SCENARIO, kernel={"type": "constant_decay", "kappa0": 0.5, "decay": 30.0})
    fp = dc.control(json.dumps(kernel))
    assert fp["summary"]["mode"] == "fixed_point", fp["summary"]["mode"]

    with tempfile.TemporaryDirectory() as tmp:
        status = dc.verify(text, ["hardy", "dissipativity"], tmp)
        assert status == {"dissipativity": True, "hardy": True}, status
        assert (Path(tmp) / "hardy.json").exists()

    try:
        dc.validate("{ not json")
    except ValueError as err:
        assert "line 1" in str(err)
    else:
        raise AssertionError("malformed scenario was accepted")

    try:
        dc.control(text, mode="sideways")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown mode was accepted")

    print(f"degenctl_py {dc.__version__}: final_ratio {summary['final_ratio']:.3e}, {len(dc.CHECKS)} checks available")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
