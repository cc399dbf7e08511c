"""Characteristic determinants and complex root localization."""

import csv
import io

import numpy as np

from .diffres import boundary_matrix, mu_from_lambda
from .errors import NoConvergence, ValidationError
from .gridfn import format_float

CLUSTER_TOL = 1e-6
NEWTON_MAX = 60


def char_det_transport(lam, tc):
    """det(I - K E_lam(1))."""
    e = np.exp(-complex(lam) / tc.c)
    return complex(np.linalg.det(np.eye(tc.m) - tc.k * e[None, :]))


def char_det_diffusion(lam, dc):
    """Determinant of the boundary system in the scaled (C1, D2) unknowns."""
    mu = mu_from_lambda(lam, dc.sigma)
    return complex(np.linalg.det(boundary_matrix(mu, dc)))


def char_det_diffusion_mu(mu, dc):
    """Same determinant as a function of mu = sqrt(lam), mu_j = mu / sqrt(sigma_j).

    Entire in mu, so the spectrum on the cut lambda <= 0 appears as zeros on
    the imaginary mu-axis.
    """
    muj = complex(mu) / np.sqrt(dc.sigma)
    return complex(np.linalg.det(boundary_matrix(muj, dc)))


def _newton(f, z, tol, scale):
    fz = f(z)
    for _ in range(NEWTON_MAX):
        h = 1e-6 * (1.0 + abs(z))
        d = (f(z + h) - f(z - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            raise NoConvergence(f"zero derivative at {z}")
        step = fz / d
        z = z - step
        fz = f(z)
        if not np.isfinite(fz):
            raise NoConvergence(f"non-finite value at {z}")
        if abs(step) <= 1e-15 * (1.0 + abs(z)) and abs(fz) <= tol:
            return z, fz
        if abs(z) > 1e3 * scale:
            raise NoConvergence(f"iterate escaped to {z}")
    if abs(fz) <= tol:
        return z, fz
    raise NoConvergence(f"no convergence from seed, |f| = {abs(fz):.3g}")


def winding_number(f, z, r, n=128):
    th = np.linspace(0.0, 2 * np.pi, n + 1)
    vals = np.array([f(z + r * np.exp(1j * t)) for t in th])
    d = np.angle(vals[1:] / vals[:-1])
    return int(round(d.sum() / (2 * np.pi)))


def find_roots(det_fn, region, grid_step, tol=None, diagnostics=None):
    """Roots of ``det_fn`` in the closed rectangle region = (re0, re1, im0, im1).

    Seeds are grid local minima of |det_fn|, refined by Newton with a
    central-difference derivative.  Returns a list of dicts
    {lambda, residual, multiplicity_hint} sorted by (Re, Im).
    Seeds that fail are dropped; their reasons go to ``diagnostics`` if given.
    ``tol`` bounds |det| at a returned root; by default it is 1e-10 times the
    median of |det| over the scan grid (at least 1e-10).
    """
    re0, re1, im0, im1 = map(float, region)
    if not grid_step > 0 or re1 < re0 or im1 < im0:
        raise ValidationError("need grid_step > 0 and a nonempty region", "run.region")
    nr = max(2, int(np.ceil((re1 - re0) / grid_step)) + 1)
    ni = max(2, int(np.ceil((im1 - im0) / grid_step)) + 1)
    xr = np.linspace(re0, re1, nr)
    xi = np.linspace(im0, im1, ni)
    Z = xr[None, :] + 1j * xi[:, None]
    A = np.empty(Z.shape)
    for idx in np.ndindex(Z.shape):
        try:
            A[idx] = abs(det_fn(Z[idx]))
        except ArithmeticError:
            A[idx] = 0.0
        except ValueError:
            A[idx] = np.inf
    P = np.pad(A, 1, constant_values=np.inf)
    is_min = np.ones(A.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = P[1 + di:1 + di + A.shape[0], 1 + dj:1 + dj + A.shape[1]]
                is_min &= A <= nb
    is_min &= np.isfinite(A)
    if tol is None:
        fin = A[np.isfinite(A)]
        tol = 1e-10 * max(1.0, float(np.median(fin)) if fin.size else 1.0)
    scale = 1.0 + max(abs(re0), abs(re1), abs(im0), abs(im1))
    pad = 1e-9 * scale
    roots = []
    for seed in Z[is_min]:
        try:
            z, fz = _newton(det_fn, complex(seed), tol, scale)
        except (NoConvergence, ArithmeticError, ValueError) as exc:
            if diagnostics is not None:
                diagnostics.append({"seed": complex(seed), "reason": str(exc)})
            continue
        if not (re0 - pad <= z.real <= re1 + pad and im0 - pad <= z.imag <= im1 + pad):
            if diagnostics is not None:
                diagnostics.append({"seed": complex(seed), "reason": f"converged outside region to {z}"})
            continue
        if any(abs(z - r["lambda"]) <= CLUSTER_TOL for r in roots):
            continue
        roots.append({"lambda": z, "residual": abs(fz), "multiplicity_hint": None})
    roots.sort(key=lambda r: (round(r["lambda"].real, 9), round(r["lambda"].imag, 9)))
    for r in roots:
        others = [abs(r["lambda"] - q["lambda"]) for q in roots if q is not r]
        rad = min([grid_step / 2] + [d / 3 for d in others])
        try:
            r["multiplicity_hint"] = winding_number(det_fn, r["lambda"], rad)
        except (ArithmeticError, ValueError):
            r["multiplicity_hint"] = None
    return roots


def roots_to_csv(roots, fh=None):
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "residual"])
    for r in roots:
        z = r["lambda"]
        w.writerow([format_float(z.real), format_float(z.imag), format_float(r["residual"])])
    return buf.getvalue() if fh is None else None
