#!/usr/bin/env python3
"""Benchmark reconstructors across the three measurement models.

For deblurring, inpainting, and compressive random projections, evaluates
each baseline reconstructor with and without the exact projection correction
and writes one bench.csv per problem.
"""

import argparse

from projcorr.config import ExperimentConfig
from projcorr.experiments import run_bench


def blur_truncation(size, sigma=3.0):
    # keep the kernel radius ceil(truncation * sigma) inside the image
    return min(4.0, ((size - 1) // 2) / sigma)


def problem_spec(problem, size, seed):
    if problem == "deblurring":
        return {"kind": "gaussian_blur", "height": size, "width": size,
                "sigmas": [3.0, 0.15], "truncation": blur_truncation(size),
                "seed": seed}
    if problem == "inpainting":
        return {"kind": "inpainting_mask", "height": size, "width": size,
                "keep_probability": 0.5, "seed": seed}
    if problem == "projections":
        return {"kind": "random_projection", "height": size, "width": size,
                "m": max(size * size // 8, 1), "seed": seed}
    raise ValueError(f"unknown problem {problem!r}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/bench")
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--sigma", type=float, default=0.0)
    parser.add_argument("--pairs", type=int, default=64)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--problems", nargs="+",
                        default=["deblurring", "inpainting", "projections"])
    args = parser.parse_args()

    for problem in args.problems:
        config = ExperimentConfig.from_dict({
            "experiment": "bench",
            "operator": problem_spec(problem, args.size, args.seed),
            "noise": {"sigma": args.sigma},
            "reconstructor": {"kinds": ["adjoint", "pinv", "tikhonov", "learned_linear"],
                              "alpha": 1e-5},
            "dataset": {"count": args.pairs, "test_count": max(args.pairs // 4, 4),
                        "seed": 5, "name": problem},
            "output_dir": f"{args.out}/{problem}",
            "base_seed": args.seed,
        })
        summary = run_bench(config)
        print(f"[{problem}] wrote {summary['csv']}")
        for row in summary["summaries"]:
            print(
                f"  {row['reconstructor']:>15}: "
                f"net {row['psnr_net']:6.2f} dB -> projected {row['psnr_projected']:6.2f} dB"
            )


if __name__ == "__main__":
    main()
