import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

PROBE = Path(__file__).with_name("jit_probe.py")


def probe(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("FILTANN_DISABLE_JIT", None)
    if disable:
        env["FILTANN_DISABLE_JIT"] = "1"
    out = subprocess.run([sys.executable, str(PROBE)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def test_fallback_matches_compiled_kernels():
    fast, slow = probe(False), probe(True)
    assert fast["jit"] is True and slow["jit"] is False
    assert fast["edges"] == slow["edges"]
    for a, b in zip(fast["runs"], slow["runs"]):
        assert a["ids"] == b["ids"]
        assert a["counters"] == b["counters"]
        np.testing.assert_allclose(a["dist"], b["dist"], rtol=1e-12, atol=1e-12)
