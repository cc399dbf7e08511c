"""Scan a rectangle for zeros of the transport characteristic determinant.

Random K (or a fixed one via --k) with random speeds; roots are reported
together with the condition estimate the direct resolvent sees just off the root.
"""

import argparse
import json
from dataclasses import dataclass

import numpy as np

from netsemi.errors import NearSpectrum
from netsemi.gridfn import Grid, NetworkState
from netsemi.netmodel import TransportCoupling
from netsemi.spectral import char_det_transport, find_roots
from netsemi.transres import solve_resolvent_transport


@dataclass
class Config:
    m: int = 2
    seed: int = 0
    re0: float = -3.0
    re1: float = 3.0
    im0: float = -20.0
    im1: float = 20.0
    step: float = 0.25
    offset: float = 1e-6
    k: str = ""


def run(cfg):
    rng = np.random.default_rng(cfg.seed)
    if cfg.k:
        k = np.array(json.loads(cfg.k), dtype=float)
        c = np.ones(k.shape[0])
    else:
        k = rng.uniform(-1.5, 1.5, (cfg.m, cfg.m))
        c = rng.uniform(0.5, 2, cfg.m)
    tc = TransportCoupling(k, c)
    diag = []
    roots = find_roots(lambda z: char_det_transport(z, tc), (cfg.re0, cfg.re1, cfg.im0, cfg.im1),
                       cfg.step, diagnostics=diag)
    f = NetworkState.constant(Grid.uniform(10), tc.m)
    out = []
    for r in roots:
        z = r["lambda"]
        try:
            cond_at = solve_resolvent_transport(z, tc, f).condition_estimate
        except NearSpectrum as exc:
            cond_at = exc.condition
        try:
            cond_off = solve_resolvent_transport(z + cfg.offset, tc, f).condition_estimate
        except NearSpectrum as exc:
            cond_off = exc.condition
        out.append((z, r["residual"], r["multiplicity_hint"], cond_at, cond_off))
    return tc, out, diag


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in vars(Config()).items():
        p.add_argument(f"--{name}", type=type(val), default=val)
    cfg = Config(**vars(p.parse_args()))
    tc, rows, diag = run(cfg)
    print("K =", tc.k.tolist(), " c =", tc.c.tolist())
    print("re,im,residual,multiplicity,cond_at_root,cond_at_offset")
    for z, res, mult, ca, co in rows:
        print(f"{z.real:.12g},{z.imag:.12g},{res:.2e},{mult},{ca:.3g},{co:.3g}")
    print(f"{len(diag)} seeds dropped")


if __name__ == "__main__":
    main()
