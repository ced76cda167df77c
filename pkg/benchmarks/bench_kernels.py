"""Compiled vs pure-Python kernels.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on
the same random inputs under both backends; a full solve of the bundled
instance is timed under each backend as well.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stmtd import _kernels


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def lp_inputs(rng, count, n=4, k=9):
    return [(rng.normal(size=n), rng.normal(size=(k, n))) for _ in range(count)]


def bench(backend, inputs, chain, repeat):
    lp = backend.lp_simplex
    verts = backend.polytope_vertices
    walk = backend.walk_chain
    n = inputs[0][0].shape[0]
    out = {}
    out["lp_simplex"] = _best(lambda: [lp(f, G) for f, G in inputs], repeat) / len(inputs)
    out["polytope_vertices"] = _best(lambda: [verts(G, n) for _, G in inputs], repeat) / len(inputs)
    cumP, u = chain
    out["walk_chain"] = _best(lambda: walk(cumP, u, 0), repeat)
    return out


def bench_solve(name):
    from stmtd import bilevel, solver
    from stmtd.io import synthetic_instance

    saved = {k: getattr(bilevel._kernels, k) for k in ("lp_simplex", "polytope_vertices")}
    backend = _kernels.load_backend(name)
    try:
        bilevel._kernels.lp_simplex = backend.lp_simplex
        bilevel._kernels.polytope_vertices = backend.polytope_vertices
        bilevel._TABLE_CACHE.clear()
        inst = synthetic_instance().with_alpha(1.0)
        t = time.perf_counter()
        solver.value_iteration(inst, solver.SolverConfig(epsilon=0.1, method="lp", max_iterations=20))
        return time.perf_counter() - t
    finally:
        for k, v in saved.items():
            setattr(bilevel._kernels, k, v)
        bilevel._TABLE_CACHE.clear()


def _fmt(seconds: float) -> str:
    if seconds >= 1e-2:
        return f"{seconds * 1e3:12.1f}ms"
    return f"{seconds * 1e6:12.1f}us"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    inputs = lp_inputs(rng, args.count)
    P = rng.dirichlet(np.ones(6), size=6)
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    chain = (cum, rng.random(args.steps))

    backends = _kernels.available_backends()
    results = {}
    for name in backends:
        results[name] = bench(_kernels.load_backend(name), inputs, chain, args.repeat)
        results[name]["solve (lp method, 20 sweeps)"] = bench_solve(name)

    rows = list(next(iter(results.values())))
    print(f"{'kernel':32s}" + "".join(f"{b:>14s}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for r in rows:
        line = f"{r:32s}" + "".join(_fmt(results[b][r]) for b in backends)
        if "compiled" in results and "python" in results:
            line += f"   {results['python'][r] / results['compiled'][r]:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
