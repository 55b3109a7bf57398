"""Time the compiled and pure-Python kernel backends side by side.

    python benchmarks/bench_kernels.py [--dataset lesmis] [--m 9] [--trials 300]

Reports the full RA matrix, incremental RA rescoring of random
perturbations and the incremental fitness evaluation used by the
evolutionary search. Both backends must agree on every fitness value.
"""

import argparse
import time

import numpy as np

from lpdefense import datasets, kernels
from lpdefense.evolution import FitnessContext, random_chromosome
from lpdefense.graph import kfold_split


def best_of(fn, repeat=5, number=1):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", default="lesmis")
    ap.add_argument("--m", type=int, default=9)
    ap.add_argument("--trials", type=int, default=300)
    args = ap.parse_args(argv)

    _, g = datasets.load(args.dataset)
    part = kfold_split(g, 10, 0)[0]
    rng = np.random.default_rng(0)
    chroms = [random_chromosome(FitnessContext(part), args.m, rng) for _ in range(args.trials)]
    dense = part.train_graph.dense

    impls = kernels.backends()
    results, values = {}, {}
    for name, impl in impls.items():
        ctx = FitnessContext(part, backend=impl)
        dels = [np.array(sorted(c.deleted), dtype=np.int64) for c in chroms]
        adds = [np.array(sorted(c.added), dtype=np.int64) for c in chroms]
        state = impl.RAState(dense)
        pairs = np.array(sorted(part.unknown), dtype=np.int64)

        def rescore():
            for d, a in zip(dels, adds):
                state.rescore(d, a, state.affected(d, a))

        def fit():
            return [ctx.evaluate(c, 0.01)[0] for c in chroms]

        results[name] = {
            "ra_matrix": best_of(lambda: impl.ra_matrix(dense), number=20),
            "rescore_U": best_of(lambda: state.rescore(dels[0], adds[0], pairs), number=20),
            "affected_rescore": best_of(rescore, repeat=3) / len(chroms),
            "fitness": best_of(fit, repeat=3) / len(chroms),
        }
        values[name] = fit()

    if len(values) == 2:
        assert values["python"] == values["cython"], "backends disagree on fitness"
    print(f"{args.dataset}: |V|={g.n_nodes} |E^T|={len(part.train)} m={args.m} trials={args.trials}")
    names = list(results)
    print(f"{'kernel':<18}" + "".join(f"{n:>14}" for n in names) + ("   speed-up" if len(names) == 2 else ""))
    for k in results[names[0]]:
        row = [results[n][k] for n in names]
        line = f"{k:<18}" + "".join(f"{t * 1e6:>12.1f}us" for t in row)
        if len(names) == 2:
            line += f"   {row[0] / row[1]:>7.1f}x"
        print(line)
    if "cython" not in impls:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
