"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --sizes 50 200 500 --repeat 5
"""
import argparse
import timeit

import numpy as np

from mottk import _kernels


def random_boxes(rng, n):
    xy = rng.uniform(0, 1800, (n, 2))
    wh = rng.uniform(20, 200, (n, 2))
    return np.hstack([xy, wh])


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 500])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    # the Hungarian solver is cubic; keep the Python run bounded
    parser.add_argument("--max-python-lsa", type=int, default=200)
    args = parser.parse_args(argv)

    backends = _kernels.available_backends()
    rng = np.random.default_rng(args.seed)
    print(f"backends: {', '.join(backends)} (default: {_kernels.BACKEND})")
    print(f"{'kernel':<12}{'n':>6}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        a, b = random_boxes(rng, n), random_boxes(rng, n)
        cost = rng.random((n, n))
        for name in ("iou_matrix", "giou_matrix", "solve_lsa"):
            times = {}
            for backend in backends:
                mod = _kernels.get_backend(backend)
                if name == "solve_lsa" and backend == "python" and n > args.max_python_lsa:
                    continue
                fn = getattr(mod, name)
                call = (lambda: fn(cost)) if name == "solve_lsa" else (lambda: fn(a, b))
                times[backend] = best_of(call, args.repeat)
            cells = "".join(f"{times[b] * 1e3:>10.3f}ms" if b in times else f"{'-':>12}" for b in backends)
            speedup = ""
            if "cython" in times and "python" in times:
                speedup = f"{times['python'] / times['cython']:>9.1f}x"
            print(f"{name:<12}{n:>6}{cells}{speedup:>10}")


if __name__ == "__main__":
    main()
