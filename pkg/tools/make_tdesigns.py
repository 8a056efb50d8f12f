"""Generate the embedded spherical sampling designs.

Produces point sets on the unit sphere whose equal-weight averages
integrate all spherical polynomials up to degree 9 exactly (to solver
precision).  Construction: K generator points are expanded under the
symmetry group {identity, antipode, y-mirror, antipodal y-mirror}, so
every odd-degree moment and every sin-type moment vanishes identically;
the remaining even cos-type moments (degrees 2, 4, 6, 8) are driven to
zero with Levenberg-Marquardt.

Writes src/satx/data/tdesign_sphere_{56,60}.txt.  Run from the repo root:

    python tools/make_tdesigns.py
"""

import math
import sys
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares
from scipy.special import lpmv

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "satx" / "data"

EVEN_DEGREES = (2, 4, 6, 8)


def cos_harmonics(xyz):
    """Orthonormal real cos-type spherical harmonics for the even degrees.

    Returns an array of shape (n_moments, n_points).
    """
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    az = np.arctan2(y, x)
    rows = []
    for n in EVEN_DEGREES:
        for m in range(n + 1):
            leg = (-1.0) ** m * lpmv(m, n, z)
            norm = math.sqrt(
                (2 * n + 1)
                / (4 * math.pi)
                * (2.0 if m > 0 else 1.0)
                * math.factorial(n - m)
                / math.factorial(n + m)
            )
            rows.append(norm * leg * np.cos(m * az))
    return np.asarray(rows)


def expand_orbits(gen_xyz):
    """Apply {id, antipode, y-mirror, antipodal y-mirror} to every generator."""
    mirror = gen_xyz * np.array([1.0, -1.0, 1.0])
    return np.vstack([gen_xyz, -gen_xyz, mirror, -mirror])


def residuals(params, n_gen):
    q = params.reshape(n_gen, 3)
    xyz = q / np.linalg.norm(q, axis=1, keepdims=True)
    pts = expand_orbits(xyz)
    mom = cos_harmonics(pts).sum(axis=1) / len(pts)
    return mom


def min_separation_deg(pts):
    dots = pts @ pts.T
    np.fill_diagonal(dots, -1.0)
    return math.degrees(math.acos(min(1.0, dots.max())))


def solve_design(n_points, seed0=0, attempts=60):
    n_gen = n_points // 4
    for attempt in range(attempts):
        rng = np.random.default_rng(seed0 + attempt)
        q0 = rng.normal(size=(n_gen, 3))
        # keep generators off the mirror plane and the equator
        q0[:, 1] = np.sign(q0[:, 1]) * (np.abs(q0[:, 1]) + 0.3)
        q0[:, 2] = np.sign(q0[:, 2]) * (np.abs(q0[:, 2]) + 0.2)
        sol = least_squares(
            residuals,
            q0.ravel(),
            args=(n_gen,),
            method="trf",
            xtol=3e-16,
            ftol=3e-16,
            gtol=3e-16,
            max_nfev=60000,
        )
        resid = math.sqrt(2.0 * sol.cost)
        q = sol.x.reshape(n_gen, 3)
        xyz = q / np.linalg.norm(q, axis=1, keepdims=True)
        pts = expand_orbits(xyz)
        sep = min_separation_deg(pts)
        min_el = math.degrees(math.asin(np.abs(pts[:, 2]).min()))
        min_y = math.degrees(math.asin(np.abs(pts[:, 1]).min()))
        print(
            f"  n={n_points} attempt {attempt}: residual {resid:.3e}, "
            f"min sep {sep:.2f} deg, min |el| {min_el:.2f} deg, "
            f"min |y-angle| {min_y:.2f} deg"
        )
        if resid < 1e-12 and sep > 8.0 and min_el > 2.0 and min_y > 1.0:
            return pts
    raise RuntimeError(f"no acceptable {n_points}-point design found")


def write_design(pts, path):
    az = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    el = np.degrees(np.arcsin(np.clip(pts[:, 2], -1.0, 1.0)))
    order = np.lexsort((az, -el))
    lines = ["# azimuth_deg elevation_deg (equal-weight spherical design, degree 9)"]
    for i in order:
        lines.append(f"{az[i]:.17g} {el[i]:.17g}")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(pts)} points)")


def verify(path):
    rows = [
        line.split()
        for line in path.read_text().splitlines()
        if line and not line.startswith("#")
    ]
    ang = np.array([[float(a), float(e)] for a, e in rows])
    az, el = np.radians(ang[:, 0]), np.radians(ang[:, 1])
    pts = np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1
    )
    first = np.abs(pts.sum(axis=0)).max()
    # all moments up to degree 9, both cos and sin type
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    azi = np.arctan2(y, x)
    worst = 0.0
    for n in range(1, 10):
        for m in range(0, n + 1):
            leg = (-1.0) ** m * lpmv(m, n, z)
            norm = math.sqrt(
                (2 * n + 1) / (4 * math.pi)
                * (2.0 if m > 0 else 1.0)
                * math.factorial(n - m) / math.factorial(n + m)
            )
            worst = max(worst, abs((norm * leg * np.cos(m * azi)).mean()))
            if m > 0:
                worst = max(worst, abs((norm * leg * np.sin(m * azi)).mean()))
    n_upper = int((ang[:, 1] > 0).sum())
    print(
        f"verify {path.name}: max |first moment| {first:.2e}, "
        f"max |moment up to degree 9| {worst:.2e}, upper-hemisphere points {n_upper}"
    )
    return first < 1e-12 and worst < 1e-10


def main():
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    ok = True
    for n, seed in ((56, 11), (60, 7)):
        pts = solve_design(n, seed0=seed)
        path = DATA_DIR / f"tdesign_sphere_{n}.txt"
        write_design(pts, path)
        ok = verify(path) and ok
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
