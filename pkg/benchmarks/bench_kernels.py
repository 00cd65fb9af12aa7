"""Compare the compiled and pure-Python Metropolis kernels.

Runs one chain of each ansatz through both backends on identical inputs,
checks that they agree, and prints wall time per sample.

    python benchmarks/bench_kernels.py --sites 16 --samples 2000
"""

import argparse
import time

import numpy as np

from atvmc import kernels
from atvmc.ansatz import JastrowAnsatz, SymmetricRbmAnsatz
from atvmc.model import TfiHamiltonian


def run_chain(backend, ansatz, values, H, spins, uniforms, n_burn, n_keep):
    s = spins.copy()
    start = time.perf_counter()
    if isinstance(ansatz, JastrowAnsatz):
        res = backend.jastrow_chain(s, values, uniforms, n_burn, n_keep, H.J, H.h)
    else:
        a, b, W = ansatz.split(values)
        res = backend.rbm_chain(s, complex(a), b.copy(), np.ascontiguousarray(W), uniforms, n_burn, n_keep, H.J, H.h)
    return time.perf_counter() - start, res


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sites", type=int, default=16)
    p.add_argument("--density", type=int, default=3)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--burn", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if kernels.compiled is None:
        print("compiled kernels are not built; only the Python backend is timed")
    rng = np.random.default_rng(args.seed)
    H = TfiHamiltonian.from_g(args.sites, 1.5)
    spins = rng.choice([-1, 1], size=args.sites).astype(np.int8)
    uniforms = rng.uniform(size=(args.burn + args.samples) * args.sites)

    print(f"{'ansatz':<14}{'backend':<10}{'us/sample':>12}{'speedup':>10}")
    for ansatz in (JastrowAnsatz(args.sites), SymmetricRbmAnsatz(args.sites, args.density)):
        values = ansatz.random_state(rng, 0.2).values.astype(complex)
        timings = {}
        results = {}
        for name in ("python", "cython"):
            if name == "cython" and kernels.compiled is None:
                continue
            elapsed, res = run_chain(kernels.get_backend(name), ansatz, values, H, spins, uniforms,
                                     args.burn, args.samples)
            timings[name], results[name] = elapsed, res
        if len(results) == 2:
            agree = all(np.allclose(x, y, rtol=1e-10, atol=1e-12)
                        for x, y in zip(results["cython"][:3], results["python"][:3]))
            if not agree:
                raise SystemExit(f"backends disagree for {ansatz.kind}")
        base = timings["python"]
        for name, elapsed in timings.items():
            per = 1e6 * elapsed / args.samples
            print(f"{ansatz.kind:<14}{name:<10}{per:>12.2f}{base / elapsed:>9.1f}x")


if __name__ == "__main__":
    main()
