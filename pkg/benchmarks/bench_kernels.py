#!/usr/bin/env python3
"""Benchmark the compiled episode kernel against the numpy fallback.

Times full evaluation runs (episode sampling + patch subsampling +
classification) and the bare kernel call on pre-gathered arrays, for a
few episode shapes. Run after `pip install -e . --no-build-isolation`:

    python3 benchmarks/bench_kernels.py [--episodes N]
"""

import argparse
import time

import numpy as np

from gestalteval import core
from gestalteval.episodes import EpisodeSpec, subseed_rng
from gestalteval.estimator import CovarianceDiag, FusionConfig, LambdaDiag
from gestalteval.harness import run_eval
from gestalteval.oracle import GaussianImageModel, generate_dataset


def build_dataset(dim, n_classes=10, images_per_class=40, patches=10, seed=3):
    rng = subseed_rng(seed, 99)
    model = GaussianImageModel(
        dim=dim,
        class_means=rng.standard_normal((n_classes, dim)) * 0.5,
        class_spread=CovarianceDiag.isotropic(dim, 0.01),
        patch_cov=CovarianceDiag.isotropic(dim, 1.0),
        seed=seed,
    )
    return generate_dataset(model, images_per_class, patches)[0]


def bench_run_eval(episodes):
    print(f"\nfull run_eval: 5-way 1-shot 15-query, {episodes} episodes, m=5")
    print(f"{'dim':>6} {'backend':>10} {'seconds':>9} {'eps/s':>9} {'speedup':>8}")
    for dim in (32, 128, 640):
        ds = build_dataset(dim)
        spec = EpisodeSpec(5, 1, 15, groups=1, episodes_per_group=episodes)
        config = FusionConfig(lam=LambdaDiag(0.5), patches_m=5)
        seconds = {}
        accs = {}
        for backend in core.available_backends():
            start = time.perf_counter()
            report = run_eval(ds, spec, config, 1, backend=backend)
            seconds[backend] = time.perf_counter() - start
            accs[backend] = report.mean_accuracy
        assert len(set(round(a, 9) for a in accs.values())) == 1, accs
        base = seconds.get("python")
        for backend, dt in sorted(seconds.items()):
            speedup = f"{base / dt:7.2f}x" if base else "     n/a"
            print(f"{dim:>6} {backend:>10} {dt:9.3f} {episodes / dt:9.0f} {speedup}")


def bench_kernel_only(calls=2000):
    print(f"\nbare kernel: pre-gathered arrays, {calls} calls, 5-way 1-shot 15-query, m=5")
    print(f"{'dim':>6} {'backend':>10} {'us/call':>9} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for dim in (32, 128, 640):
        args = (
            rng.normal(size=(5, 1, dim)),
            rng.normal(size=(5, 1, 5, dim)),
            rng.normal(size=(5, 15, dim)),
            rng.normal(size=(5, 15, 5, dim)),
            np.full(dim, 0.5),
            np.full(dim, 0.5),
            np.arange(5, dtype=np.int64),
            0,
            False,
        )
        micros = {}
        for backend in core.available_backends():
            kernel = core.get_backend(backend)
            kernel.evaluate_episode(*args)  # warm up
            start = time.perf_counter()
            for _ in range(calls):
                kernel.evaluate_episode(*args)
            micros[backend] = (time.perf_counter() - start) / calls * 1e6
        base = micros.get("python")
        for backend, us in sorted(micros.items()):
            speedup = f"{base / us:7.2f}x" if base else "     n/a"
            print(f"{dim:>6} {backend:>10} {us:9.1f} {speedup}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=500)
    args = parser.parse_args()
    print("available backends:", ", ".join(core.available_backends()))
    bench_kernel_only()
    bench_run_eval(args.episodes)


if __name__ == "__main__":
    main()
