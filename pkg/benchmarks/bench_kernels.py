"""Compare the numba kernels with the numpy fallback.

Each backend runs in its own interpreter (the backend is fixed at import
time through ``AJCIR_BACKEND``). Reported times exclude the first call so
numba compilation is not counted; the first-call time is shown separately.

    python benchmarks/bench_kernels.py [--paths 20000] [--n-u 400] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _timed(fn, repeat):
    t0 = time.perf_counter()
    out = fn()
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return first, best, out


def worker(paths, n_u, repeat):
    from ajcir import BACKEND, preset
    from ajcir.riccati import riccati_grid
    from ajcir.simulator import simulate_ensemble

    p2 = preset("reference2d")
    p1 = preset("reference1d")
    U = (1j * np.linspace(0.0, 200.0, n_u))[:, None]
    res = {"backend": BACKEND}

    first, best, ens = _timed(
        lambda: simulate_ensemble(p2, [1.0, 2.0], 1.0, 5e-3, paths, 7), repeat)
    res["euler"] = {"first": first, "best": best,
                    "checksum": float(ens.terminal.sum()),
                    "per_path_step_ns": 1e9 * best / (paths * 200)}
    first, best, (phi, psi) = _timed(
        lambda: riccati_grid(p1, U, [0.5, 1.0], rtol=1e-8, atol=1e-10), repeat)
    res["riccati"] = {"first": first, "best": best,
                      "checksum": float(np.abs(np.exp(phi[:, -1] + psi[:, -1, 0])).sum()),
                      "per_u_ms": 1e3 * best / n_u}
    print(json.dumps(res))


def launch(backend, args):
    env = dict(os.environ, AJCIR_BACKEND=backend)
    cmd = [sys.executable, __file__, "--worker", "--paths", str(args.paths),
           "--n-u", str(args.n_u), "--repeat", str(args.repeat)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--n-u", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.paths, args.n_u, args.repeat)
        return
    runs = {b: launch(b, args) for b in ("numba", "numpy")}
    print(f"{'kernel':<10}{'backend':<8}{'first [s]':>11}{'best [s]':>10}{'speedup':>9}"
          f"  checksum")
    for kernel in ("euler", "riccati"):
        ref = runs["numpy"][kernel]["best"]
        for b in ("numba", "numpy"):
            r = runs[b][kernel]
            print(f"{kernel:<10}{runs[b]['backend']:<8}{r['first']:>11.3f}{r['best']:>10.3f}"
                  f"{ref / r['best']:>9.1f}  {r['checksum']:.12g}")
    # Euler draws identical numbers; the ODE solvers only share a tolerance
    tol = {"euler": 1e-12, "riccati": 1e-7}
    same = {k: abs(runs["numba"][k]["checksum"] - runs["numpy"][k]["checksum"])
            <= tol[k] * abs(runs["numpy"][k]["checksum"]) for k in tol}
    print("backends agree:", same)


if __name__ == "__main__":
    main()
