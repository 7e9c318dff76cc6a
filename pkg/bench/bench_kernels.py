"""Compare the compiled and numpy kernel backends.

    python bench/bench_kernels.py [--rows 4096] [--repeat 20] [--skip-pipeline]

Prints per-kernel median timings and an end-to-end training + attack timing
for each available backend.
"""
import argparse
import statistics
import time

import numpy as np

from idsadv import attacks, dataio, kernels, neuralnet


def _median_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def kernel_cases(rows, width=16):
    rng = np.random.default_rng(0)
    z = rng.normal(size=(rows, width))
    up = rng.normal(size=z.shape)
    keep = rng.random(z.shape) > 0.1
    a, b, alpha_p = neuralnet.alpha_dropout_constants(0.1)
    x = rng.uniform(size=(rows, 10))
    g = rng.normal(size=x.shape)
    cand = x + rng.normal(scale=0.2, size=x.shape)
    eps, lo, hi = np.full(10, 0.1), np.zeros(10), np.ones(10)
    return {
        "relu forward": lambda: kernels.act_forward(z, kernels.RELU),
        "selu forward": lambda: kernels.act_forward(z, kernels.SELU),
        "relu backward": lambda: kernels.act_backward(z, up, kernels.RELU),
        "selu backward": lambda: kernels.act_backward(z, up, kernels.SELU),
        "alpha dropout": lambda: kernels.alpha_dropout(z, keep, a, b, alpha_p),
        "signed step": lambda: kernels.signed_step(x, g, eps),
        "project linf": lambda: kernels.project_linf(cand, x, eps, lo, hi),
    }


def pipeline():
    spec = dataio.load_preset("botiot-mini")
    ds = dataio.generate_synthetic(spec)
    ds = dataio.apply_normalization(ds, dataio.fit_normalizer(ds))
    model = neuralnet.init_model(neuralnet.ModelConfig("SNN", ds.d, seed=0))
    model, _ = neuralnet.train(model, ds, neuralnet.TrainConfig(epochs=5))
    attacks.pgd(model, ds.features, ds.labels, attacks.AttackConfig(0.1, 0.01, 10))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args()

    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    results = {}
    for name in backends:
        kernels.use_backend(name)
        cases = kernel_cases(args.rows)
        results[name] = {k: _median_time(fn, args.repeat) for k, fn in cases.items()}
        if not args.skip_pipeline:
            results[name]["train 5 epochs + PGD (N=20000)"] = _median_time(pipeline, 1)

    header = f"{'kernel':34s}" + "".join(f"{b:>14s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for case in results["python"]:
        row = f"{case:34s}" + "".join(f"{results[b][case] * 1e3:12.3f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{results['python'][case] / results['compiled'][case]:9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
