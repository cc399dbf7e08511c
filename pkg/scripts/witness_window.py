"""Diffusion witnesses: certificate data and the first step size that turns them negative.

For random couplings violating the sign criterion, prints the bump radius,
the certified second derivative at the zero minimum and the largest
backward-Euler step (tried on a 10x ladder) after which the state is negative.
"""

import argparse
from dataclasses import dataclass

import numpy as np

from netsemi.gridfn import Grid
from netsemi.netmodel import DiffusionCoupling
from netsemi.posit import check_diffusion_positivity, diffusion_pmp_witness, witness_negativity_time


@dataclass
class Config:
    trials: int = 20
    m: int = 3
    n: int = 400
    seed: int = 0


def violating(rng, m):
    while True:
        dc = DiffusionCoupling(*[rng.normal(size=(m, m)) for _ in range(4)], rng.uniform(0.5, 2, m))
        if not check_diffusion_positivity(dc).positive:
            return dc


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in vars(Config()).items():
        p.add_argument(f"--{name}", type=type(val), default=val)
    cfg = Config(**vars(p.parse_args()))
    rng = np.random.default_rng(cfg.seed)
    g = Grid.uniform(cfg.n)
    print("block,i,j,a,d2u,verified,h_negative,min_after_step")
    for _ in range(cfg.trials):
        dc = violating(rng, cfg.m)
        u, spec = diffusion_pmp_witness(dc, g)
        h, low = witness_negativity_time(dc, u)
        v = spec.violation
        c = spec.certificate
        print(f"{v.block},{v.i},{v.j},{spec.a:.4g},{c['d2u']:.4g},{c['verified']},{h},{low:.3e}")


if __name__ == "__main__":
    main()
