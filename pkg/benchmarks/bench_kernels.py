"""Compare the compiled simulation kernel against the pure-Python fallback.

The backend is fixed at import time by FFRSIM_DISABLE_NUMBA, so each backend
is timed in its own interpreter.

    python benchmarks/bench_kernels.py --duration 10 --repeats 3
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from ffrsim import BACKEND, default_document
duration, repeats = float(sys.argv[1]), int(sys.argv[2])
sc = default_document().with_overrides(duration=duration).scenario(4, "adaptive")
from ffrsim.scenario import simulate_samples
t0 = time.perf_counter()
first = simulate_samples(sc)
warm = time.perf_counter() - t0
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    out = simulate_samples(sc)
    times.append(time.perf_counter() - t0)
print(json.dumps({"backend": BACKEND, "first_s": warm, "best_s": min(times),
                  "steps": sc.n_steps, "f_min": float(out[:, 1].min()),
                  "checksum": float(np.abs(out).sum())}))
"""


def time_backend(disable_numba: bool, duration: float, repeats: int) -> dict:
    env = dict(os.environ)
    if disable_numba:
        env["FFRSIM_DISABLE_NUMBA"] = "1"
    else:
        env.pop("FFRSIM_DISABLE_NUMBA", None)
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-c", CHILD, str(duration), str(repeats)],
                          env=env, capture_output=True, text=True, check=True)
    rec = json.loads(proc.stdout.strip().splitlines()[-1])
    rec["wall_s"] = time.perf_counter() - t0
    return rec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration", type=float, default=10.0, help="simulated seconds per run (> disturbance time)")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    nb = time_backend(False, args.duration, args.repeats)
    py = time_backend(True, args.duration, args.repeats)
    for r in (nb, py):
        rate = r["steps"] / r["best_s"]
        print(f"{r['backend']:>7}: first call {r['first_s'] * 1e3:9.1f} ms, best {r['best_s'] * 1e3:9.2f} ms "
              f"({rate:,.0f} steps/s), nadir {r['f_min']:.9f} Hz")
    print(f"speedup (best vs best): {py['best_s'] / nb['best_s']:.1f}x")
    print(f"trajectories agree: {abs(nb['checksum'] - py['checksum']) <= 1e-9 * abs(py['checksum'])}")


if __name__ == "__main__":
    main()
