#!/usr/bin/env python3
"""Time the compiled and plain-numpy backends on identical work.

Each backend runs in its own subprocess (the choice is made at import time
from ``SIGMA2_NUMBA``), does a warm-up pass, then times

  * a fixed n=5 flow segment on 256 latitude points, and
  * 500 passes of the cyclic-Jacobi eigenvalue kernel on random matrices.

Usage: ``python benchmarks/backend_bench.py``
"""

import json
import os
import subprocess
import sys
from pathlib import Path

SRC = str(Path(__file__).resolve().parents[1] / "src")


def child() -> None:
    from time import perf_counter

    import numpy as np

    from sigma2flow._accel import backend_name
    from sigma2flow.discretize import sphere_latitude
    from sigma2flow.flow import FlowConfig, flow_run, initial_field
    from sigma2flow.geometry import RoundSphere
    from sigma2flow.symfun import elementary_symmetric, jacobi_eigenvalues

    sphere = RoundSphere(5)
    grid = sphere_latitude(5, 256)
    u0 = initial_field("cosine", grid, 0.1)
    flow_run(sphere, u0, FlowConfig(eps=2.0, t_max=0.02), grid=grid)  # warm-up

    t0 = perf_counter()
    res = flow_run(sphere, u0,
                   FlowConfig(eps=2.0, t_max=1.0, tol_converge=0.0), grid=grid)
    flow_seconds = perf_counter() - t0

    rng = np.random.default_rng(7)
    mats = []
    for _ in range(500):
        m = int(rng.integers(2, 9))
        q, _ = np.linalg.qr(rng.standard_normal((m, m)))
        a = q @ np.diag(rng.standard_normal(m)) @ q.T
        mats.append(0.5 * (a + a.T))
    jacobi_eigenvalues(mats[0])  # warm-up
    t0 = perf_counter()
    checksum = 0.0
    for a in mats:
        checksum += float(elementary_symmetric(jacobi_eigenvalues(a))[2])
    jacobi_seconds = perf_counter() - t0

    print(json.dumps({
        "backend": backend_name(),
        "flow_seconds": flow_seconds,
        "flow_steps": res.steps,
        "F2": res.F2,
        "jacobi_seconds": jacobi_seconds,
        "sigma2_checksum": checksum,
    }))


def main() -> None:
    results = []
    for flag in ("1", "0"):
        env = dict(os.environ)
        env["SIGMA2_NUMBA"] = flag
        env["PYTHONPATH"] = SRC + os.pathsep + env.get("PYTHONPATH", "")
        proc = subprocess.run([sys.executable, __file__, "--child"],
                              env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(proc.returncode)
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    fast, slow = results
    print(f"{'backend':<10} {'flow to t=1 (s)':>16} {'steps':>7} "
          f"{'jacobi x500 (s)':>16}")
    for r in results:
        print(f"{r['backend']:<10} {r['flow_seconds']:>16.3f} "
              f"{r['flow_steps']:>7d} {r['jacobi_seconds']:>16.3f}")
    print(f"{'speedup':<10} "
          f"{slow['flow_seconds'] / fast['flow_seconds']:>15.1f}x "
          f"{'':>7} {slow['jacobi_seconds'] / fast['jacobi_seconds']:>15.1f}x")
    df2 = abs(fast["F2"] - slow["F2"])
    dchk = abs(fast["sigma2_checksum"] - slow["sigma2_checksum"])
    print(f"cross-backend agreement: |dF2| = {df2:.3e}, "
          f"|d sigma2 checksum| = {dchk:.3e}")


if __name__ == "__main__":
    if "--child" in sys.argv:
        child()
    else:
        main()
