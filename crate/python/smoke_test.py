"""Smoke test for the ringvortex Python extension.

Build and install first:
    maturin build --release -m crates/ringvortex-py/Cargo.toml
    pip install target/wheels/ringvortex-*.whl
"""

import json
import math

import numpy as np
from scipy.special import ellipe, ellipkm1

import ringvortex as rv


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    # ringvortex takes the modulus k; scipy takes the parameter k^2.
    for k in (0.0, 0.3, 0.9, 0.999999):
        ref_k, ref_e = ellipkm1((1.0 - k) * (1.0 + k)), ellipe(k * k)
        check(abs(rv.elliptic_k(k) - ref_k) <= 1e-13 * ref_k, f"K(k={k}) matches scipy")
        check(abs(rv.elliptic_e(k) - ref_e) <= 1e-13, f"E(k={k}) matches scipy")

    g = rv.stream_kernel(1.0, 0.0, 1.2, 0.3)
    check(g < 0.0 and abs(g - rv.stream_kernel(1.2, 0.3, 1.0, 0.0)) <= 1e-15, "stream kernel negative and symmetric")

    gamma, q = [1.0, 1.0], [0.05, 0.2, -0.05, -0.2]
    v = rv.pv_velocity("J1", gamma, q)
    check(len(v) == 4 and all(map(math.isfinite, v)), "J1 velocity has 2k finite components")
    h, p = rv.pv_invariants("J2", gamma, q)
    check(math.isfinite(h) and math.isfinite(p), "J2 invariants finite")

    cfg = rv.RunConfig.leapfrog()
    body = cfg.configuration(1e-2)
    check(len(body) == 2, "leapfrog configuration has two bodies")
    c = body.assemble(nodes=16)
    e, m, a = (np.array(x) for x in (c.e, c.m, c.a))
    check(np.allclose(e, e.T, atol=1e-14), "E symmetric")
    check(np.allclose(m, m.T, atol=1e-14), "M symmetric")
    check(np.allclose(a, -a.T, atol=1e-14), "A antisymmetric")
    lo, hi = c.inertia_spectrum()
    check(0.0 < lo <= hi, "E + M positive definite")
    rec = json.loads(c.to_json())
    check({"E", "M", "A", "G", "C"} <= rec.keys(), "coefficient record is labeled")

    pv = cfg.point_vortex()
    check(pv.completed and pv.energy_drift() < 1e-8, "point-vortex run conserves H")

    try:
        rv.RunConfig.from_json('{"schema_version": 1}')
    except ValueError as err:
        check("bodies" in str(err), "malformed config raises ValueError naming the field")
    else:
        raise SystemExit("FAIL: malformed config accepted")

    passed, report = rv.run_validation("fast")
    check(passed, f"fast validation ({len(json.loads(report)['checks'])} checks)")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
