"""Wall time of the compiled kernels against the pure-numpy fallback.

Each mode runs in its own interpreter because the JIT switch is read at
import time. The compiled timings exclude the first (compiling) call.

    python benchmarks/bench_jit.py [--n 20000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from streamboost import _jit
from streamboost.losses import LossSpec
from streamboost.sgb_nonsmooth import SGBResidual
from streamboost.sgb_smooth import SGBSmooth
from streamboost.tree import RegressionTree
from streamboost.weak_learners import OnlineLinear

n, repeat = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
X = rng.uniform(-1, 1, size=(n, 8))
z = (X @ rng.normal(size=(8, 1))) + 0.1 * rng.normal(size=(n, 1))
u = np.sign(z)

cases = {
    "smooth_linear_N8": lambda: SGBSmooth([OnlineLinear(8, 1, step=0.1) for _ in range(8)], 0.1,
                                          LossSpec("square")).fit_stream(X, z),
    "residual_linear_N8": lambda: SGBResidual([OnlineLinear(8, 1, step=0.1) for _ in range(8)],
                                              LossSpec("hinge_l2", 0.1), 2.0).fit_stream(X, u),
    "tree_depth6": lambda: RegressionTree(6).fit(X[:5000], np.sin(3 * X[:5000, :2])),
}
out = {"jit": _jit.USE_NUMBA}
for name, fn in cases.items():
    fn()  # warm-up, compiles when JIT is on
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(disable, n, repeat):
    env = dict(os.environ)
    env.pop("STREAMBOOST_DISABLE_JIT", None)
    if disable:
        env["STREAMBOOST_DISABLE_JIT"] = "1"
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(n), str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20000, help="stream length")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    fast, slow = run(False, args.n, args.repeat), run(True, args.n, args.repeat)
    if not fast["jit"]:
        print("warning: numba unavailable, both runs use the fallback")
    print(f"{'case':<22}{'numba s':>10}{'numpy s':>10}{'speedup':>10}")
    for name in fast:
        if name == "jit":
            continue
        print(f"{name:<22}{fast[name]:>10.3f}{slow[name]:>10.3f}{slow[name] / fast[name]:>9.1f}x")


if __name__ == "__main__":
    main()
