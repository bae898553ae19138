"""Random patches and frames shared by the test modules."""
import numpy as np

from cpq.geometry import REFERENCE_NODES, CurvedTriangle

# verdict lines of the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def random_planar(rng, scale=1.0):
    while True:
        pts = rng.normal(size=(3, 3)) * scale
        tri = CurvedTriangle.planar(*pts)
        n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        # keep reasonably shaped triangles
        if np.linalg.norm(n) > 0.3 * tri.diameter**2:
            return tri


def random_quadratic(rng, bend=0.15):
    """Planar-ish right triangle with perturbed midpoints."""
    base = np.column_stack([REFERENCE_NODES, np.zeros(6)])
    pts = base + bend * rng.uniform(-1, 1, size=(6, 3)) * np.array([0.3, 0.3, 1.0])
    pts[:3] = base[:3] + 0.05 * rng.uniform(-1, 1, size=(3, 3))
    return CurvedTriangle(2, pts)


def interior_point(rng, margin=0.05):
    while True:
        p = rng.uniform(margin, 1 - 2 * margin, size=2)
        if p.sum() < 1 - margin:
            return p


def random_frame_setup(rng, h):
    """Random curved patch, quadratic density and foot (possibly outside the triangle)."""
    from cpq.geometry import DensityPolynomial
    from cpq.projection import make_frame
    from cpq.subtraction import build_expansion

    tri = random_quadratic(rng, bend=0.3)
    dens = DensityPolynomial(2, rng.normal(size=6))
    xhat0 = rng.uniform(-0.2, 0.9, size=2)
    frame = make_frame(tri, xhat0, h=h * tri.diameter)
    return tri, dens, frame, build_expansion(tri, dens, frame)


def edge_reduction_errors(rng, n_frames, heights, n_edge=32):
    """Largest relative differences between edge reductions and 2D polar quadrature.

    Returns a dict keyed by "I2", "I1" and "E2" (elasticity).
    """
    from cpq.continuation import elasticity_i_minus2, i_minus1, i_minus2
    from cpq.oracle import integrate_polar
    from cpq.subtraction import t_minus1, t_minus2

    worst = {"I2": 0.0, "I1": 0.0, "E2": 0.0}
    for _ in range(n_frames):
        state = rng.bit_generator.state
        for h in heights:
            rng.bit_generator.state = state  # same patch for every height
            tri, dens, frame, exp = random_frame_setup(rng, h)
            hh = frame.h
            e = rng.normal(size=3)
            e /= np.linalg.norm(e)

            def g_e(X, exp=exp, frame=frame, e=e, hh=hh):
                d = X - frame.xhat0
                Jd = d @ exp.J0.T
                R1 = np.einsum("...c,...c->...", Jd, Jd) + hh * hh
                return ((Jd - hh * exp.unit_normal) @ (exp.n0_norm * e)) * exp.phi0 / R1**1.5

            pairs = [
                ("I2", lambda X: t_minus2(exp, X - frame.xhat0, hh), i_minus2(exp, frame, n_edge)),
                ("I1", lambda X: t_minus1(exp, X - frame.xhat0, hh), i_minus1(exp, frame, n_edge)),
                ("E2", g_e, elasticity_i_minus2(exp, frame, e, n_edge)),
            ]
            for name, g, value in pairs:
                ref = integrate_polar(g, frame.xhat0, abs(hh), q=20, metric=exp.J0, raise_on_fail=False)
                scale = max(abs(ref.value), 1e-12)
                worst[name] = max(worst[name], abs(value - ref.value) / scale)
    return worst


def residual_exponent(tri, density, xhat0, h):
    """Worst fitted exponent of the regularized integrand along 8 rays into the foot.

    Samples at rounding level (below 1e3 eps times the natural size
    |phi| |n| / |F - x0|^2 of the raw kernel) carry no information about the
    singularity and are left out of the fit; a ray with fewer than two
    resolvable samples has no singular part and counts as exponent 0.
    Also returns the largest value of t * |integrand| seen on the rays.
    """
    import math

    from cpq.geometry import density_eval
    from cpq.projection import make_frame
    from cpq.subtraction import build_expansion, regularized_integrand

    frame = make_frame(tri, xhat0, h=h)
    exp = build_expansion(tri, density, frame)
    x0 = tri.map(frame.xhat0) + h * frame.unit_normal
    ts = 10.0 ** -np.arange(1, 7)
    worst = []
    bound = 0.0
    for ang in np.arange(8) * math.pi / 4 + 0.1:
        d = np.array([math.cos(ang), math.sin(ang)])
        pts = xhat0 + ts[:, None] * d
        res = np.abs(regularized_integrand(tri, density, frame, exp, pts))
        size = (
            np.abs(density_eval(density, pts))
            * np.linalg.norm(tri.normal(pts, check=False), axis=-1)
            / np.sum((tri.map(pts) - x0) ** 2, axis=-1)
        )
        keep = res > 1e3 * np.finfo(float).eps * size
        slope = np.polyfit(np.log(ts[keep]), np.log(res[keep]), 1)[0] if keep.sum() >= 2 else 0.0
        worst.append(slope)
        bound = max(bound, float(np.max(ts * res)))
    return min(worst), bound
