#!/usr/bin/env python3
"""Render the texture-recovery demonstration images (noisy / clean / recovered).

Defaults reproduce the benchmark setup: a single sinusoid with
(A, B, lambda, mu) = (2.4, 1.4, 0.4, 0.6) on a 100x100 grid under slash noise,
estimated robustly.  A squared-error fit of the same data is also rendered so
the two recoveries can be compared side by side.
"""

import argparse
import os
import sys

from lad2d import (
    ComponentParams,
    Grid,
    ModelParams,
    mean_absolute_pixel_error,
    parse_noise_spec,
    texture_demo,
    write_pgm,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="texture_out", help="output directory")
    parser.add_argument("--size", type=int, default=100, help="grid side length")
    parser.add_argument("--noise", default="slash")
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    truth = ModelParams((ComponentParams(2.4, 1.4, 0.4, 0.6),))
    grid = Grid(args.size, args.size)
    noise = parse_noise_spec(args.noise)
    os.makedirs(args.out, exist_ok=True)

    for method in ("lad", "lse"):
        demo = texture_demo(truth, grid, noise, seed=args.seed, method=method)
        for label, image in (("noisy", demo.noisy), ("clean", demo.clean),
                             ("recovered", demo.recovered)):
            path = os.path.join(args.out, f"{method}_{label}.pgm")
            with open(path, "wb") as fh:
                fh.write(write_pgm(image))
        mae = mean_absolute_pixel_error(demo.recovered, demo.clean)
        c = demo.report.params_hat.components[0]
        print(f"{method}: A={c.A:.7f} B={c.B:.7f} lambda={c.lam:.7f} mu={c.mu:.7f} "
              f"recovered-vs-clean MAE {mae:.2f} gray levels")
    print(f"images written to {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
