"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call ``np_*`` and ``nb_*`` side by side in one process.  The
end-to-end EM timing runs a child process per backend, because the backend
is fixed at import time by ``HERDKIT_DISABLE_NUMBA``.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from herdkit import _kernels as K

EM_SNIPPET = """
import time
from herdkit import synth, msherd, BACKEND
from herdkit.design import herd_design
disp, _ = synth.simulate_csad(synth.canonical_two_regime(0))
d = herd_design(disp, n_lags=3, vol_window=30)
msherd.em_fit(2, d, restarts=1, max_iter=5)  # warm-up / compile
t = time.perf_counter()
msherd.em_fit(4, d, restarts=4, seed=1, max_iter=200)
print(BACKEND, time.perf_counter() - t)
"""


def _inputs(rng):
    R = rng.normal(0, 0.03, (2000, 100))
    mask = rng.random(R.shape) > 0.05
    x = rng.normal(size=5000)
    logdens = rng.normal(size=(5000, 4)) * 3
    P = rng.dirichlet(np.ones(4), size=4)
    filt = K.np_hamilton(logdens, P, np.full(4, 0.25))[0]
    return {
        "dispersion (2000x100)": ((R, mask, 2), K.np_dispersion, getattr(K, "nb_dispersion", None)),
        "rolling_std (T=5000, w=30)": ((x, 30), K.np_rolling_std, getattr(K, "nb_rolling_std", None)),
        "hamilton (T=5000, K=4)": ((logdens, P, np.full(4, 0.25)), K.np_hamilton, getattr(K, "nb_hamilton", None)),
        "kim (T=5000, K=4)": ((filt, P), K.np_kim, getattr(K, "nb_kim", None)),
        "bartlett_lrv (T=5000, bw=8)": ((x, 8), K.np_bartlett_lrv, getattr(K, "nb_bartlett_lrv", None)),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, (inp, f_np, f_nb) in _inputs(rng).items():
        t_np = min(timeit.repeat(lambda: f_np(*inp), number=1, repeat=args.repeat)) * 1e3
        if f_nb is None:
            print(f"{name:32s} {t_np:10.2f} {'n/a':>10s}")
            continue
        f_nb(*inp)  # compile
        t_nb = min(timeit.repeat(lambda: f_nb(*inp), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:32s} {t_np:10.2f} {t_nb:10.2f} {t_np / t_nb:7.1f}x")

    print("\nem_fit, K=4, 4 restarts of at most 200 iterations, T=3000 with lags and volatility terms")
    for flag in ("1", "0"):
        env = {**os.environ, "HERDKIT_DISABLE_NUMBA": flag}
        out = subprocess.run([sys.executable, "-c", EM_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"  {backend:6s} {float(secs):8.2f} s")


if __name__ == "__main__":
    main()
