"""Endpoint transforms and the linear-in-time point map.

A layer carries two projective endpoint warps A (t=0) and B (t=1).  A
sprite point p sits at (1-t)*A(p) + t*B(p) at time t, so every point
travels a straight line at constant speed.  The blended map is generally
not itself a homography, hence the damped Newton inversion below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class GeometricTransform:
    """3x3 projective transform with the last entry normalized to 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got {m.shape}")
        det = float(np.linalg.det(m))
        if abs(det) <= 1e-9:
            raise ValueError(f"transform is singular (det {det:.3e})")
        if abs(float(m[2, 2]) - 1.0) > 1e-12:
            raise ValueError("matrix must be normalized so h33 == 1")

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "GeometricTransform":
        m = np.asarray(m, dtype=np.float64)
        if abs(float(m[2, 2])) <= 1e-12:
            raise ValueError("cannot normalize: h33 is zero")
        return cls(m / m[2, 2])

    @classmethod
    def identity(cls) -> "GeometricTransform":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> "GeometricTransform":
        m = np.eye(3)
        m[0, 2] = dx
        m[1, 2] = dy
        return cls(m)

    @classmethod
    def similarity(
        cls, dx: float, dy: float, angle_rad: float = 0.0, scale: float = 1.0
    ) -> "GeometricTransform":
        c, s = np.cos(angle_rad) * scale, np.sin(angle_rad) * scale
        m = np.array([[c, -s, dx], [s, c, dy], [0.0, 0.0, 1.0]])
        return cls(m)

    @classmethod
    def perspective(cls, qx: float, qy: float) -> "GeometricTransform":
        m = np.eye(3)
        m[2, 0] = qx
        m[2, 1] = qy
        return cls(m)

    def compose(self, other: "GeometricTransform") -> "GeometricTransform":
        """self after other: (self @ other)(p) == self(other(p))."""
        return GeometricTransform.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "GeometricTransform":
        return GeometricTransform.from_matrix(np.linalg.inv(self.matrix))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Projective action on (..., 2) points."""
        p = np.asarray(points, dtype=np.float64)
        m = self.matrix
        x, y = p[..., 0], p[..., 1]
        denom = m[2, 0] * x + m[2, 1] * y + 1.0
        out = np.empty_like(p)
        out[..., 0] = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / denom
        out[..., 1] = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / denom
        return out

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        """d(apply)/d(point) as (..., 2, 2)."""
        p = np.asarray(points, dtype=np.float64)
        m = self.matrix
        x, y = p[..., 0], p[..., 1]
        d = m[2, 0] * x + m[2, 1] * y + 1.0
        nx = m[0, 0] * x + m[0, 1] * y + m[0, 2]
        ny = m[1, 0] * x + m[1, 1] * y + m[1, 2]
        jac = np.empty(p.shape[:-1] + (2, 2), dtype=np.float64)
        d2 = d * d
        jac[..., 0, 0] = (m[0, 0] * d - nx * m[2, 0]) / d2
        jac[..., 0, 1] = (m[0, 1] * d - nx * m[2, 1]) / d2
        jac[..., 1, 0] = (m[1, 0] * d - ny * m[2, 0]) / d2
        jac[..., 1, 1] = (m[1, 1] * d - ny * m[2, 1]) / d2
        return jac


@dataclass(frozen=True, eq=False)
class PhotometricTransform:
    """Per-channel gain and gamma plus a global offset, clamped to [0, 1]."""

    gain: np.ndarray  # (3,)
    gamma: np.ndarray  # (3,)
    offset: float

    def __post_init__(self):
        if self.gain.shape != (3,) or self.gamma.shape != (3,):
            raise ValueError("gain and gamma must be 3-vectors")
        if np.any(self.gamma <= 0):
            raise ValueError("gamma exponents must be positive")

    @classmethod
    def identity(cls) -> "PhotometricTransform":
        return cls(np.ones(3), np.ones(3), 0.0)

    def apply(self, colors: np.ndarray) -> np.ndarray:
        c = np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0)
        out = self.gain * np.power(c, self.gamma) + self.offset
        return np.clip(out, 0.0, 1.0)

    def params(self) -> np.ndarray:
        return np.concatenate([self.gain, self.gamma, [self.offset]])

    @classmethod
    def from_params(cls, params: np.ndarray) -> "PhotometricTransform":
        params = np.asarray(params, dtype=np.float64)
        return cls(params[0:3].copy(), params[3:6].copy(), float(params[6]))


def lerp_photometric(
    p0: PhotometricTransform, p1: PhotometricTransform, t: float
) -> PhotometricTransform:
    if t == 0.0:
        return p0
    if t == 1.0:
        return p1
    # a + t*(b - a) instead of (1-t)*a + t*b: bit-exact when a == b.
    base = p0.params()
    return PhotometricTransform.from_params(base + t * (p1.params() - base))


def blend_point_map(
    a: GeometricTransform, b: GeometricTransform, t: float, points: np.ndarray
) -> np.ndarray:
    """Position of sprite points at time t: (1-t)*A(p) + t*B(p)."""
    if t == 0.0:
        return a.apply(points)
    if t == 1.0:
        return b.apply(points)
    return (1.0 - t) * a.apply(points) + t * b.apply(points)


def invert_blend_map(
    a: GeometricTransform,
    b: GeometricTransform,
    t: float,
    targets: np.ndarray,
    *,
    tol: float = 1e-7,
    fail_tol: float = 1e-4,
    max_iter: int = 25,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve (1-t)*A(p) + t*B(p) = x for p, batched over targets (..., 2).

    Damped Newton on the analytic 2x2 Jacobian, seeded from the inverse
    of the matrix blend (1-t)A + tB.  Returns (points, converged); points
    with converged False failed to reach ``fail_tol`` and must be treated
    as undefined.
    """
    x = np.asarray(targets, dtype=np.float64)
    shape = x.shape[:-1]
    x = x.reshape(-1, 2)

    blend = (1.0 - t) * a.matrix + t * b.matrix
    try:
        seed_mat = np.linalg.inv(blend)
    except np.linalg.LinAlgError:
        seed_mat = np.linalg.inv(a.matrix)
    hx = seed_mat[0, 0] * x[:, 0] + seed_mat[0, 1] * x[:, 1] + seed_mat[0, 2]
    hy = seed_mat[1, 0] * x[:, 0] + seed_mat[1, 1] * x[:, 1] + seed_mat[1, 2]
    hw = seed_mat[2, 0] * x[:, 0] + seed_mat[2, 1] * x[:, 1] + seed_mat[2, 2]
    hw = np.where(np.abs(hw) < 1e-12, 1e-12, hw)
    p = np.stack([hx / hw, hy / hw], axis=-1)

    err = np.linalg.norm(blend_point_map(a, b, t, p) - x, axis=-1)
    active = err > tol
    for _ in range(max_iter):
        if not np.any(active):
            break
        pa = p[active]
        xa = x[active]
        ra = blend_point_map(a, b, t, pa) - xa
        jac = (1.0 - t) * a.jacobian(pa) + t * b.jacobian(pa)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        ok = np.abs(det) > 1e-14
        det = np.where(ok, det, 1.0)
        step = np.empty_like(pa)
        step[:, 0] = (jac[:, 1, 1] * ra[:, 0] - jac[:, 0, 1] * ra[:, 1]) / det
        step[:, 1] = (-jac[:, 1, 0] * ra[:, 0] + jac[:, 0, 0] * ra[:, 1]) / det
        step[~ok] = 0.0

        best_p = pa.copy()
        best_err = np.linalg.norm(ra, axis=-1)
        improved = np.zeros(len(pa), dtype=bool)
        damping = 1.0
        for _halving in range(4):
            cand = pa - damping * step
            cand_err = np.linalg.norm(blend_point_map(a, b, t, cand) - xa, axis=-1)
            take = ~improved & (cand_err < best_err)
            best_p[take] = cand[take]
            best_err[take] = cand_err[take]
            improved |= take
            if np.all(improved):
                break
            damping *= 0.5

        p[active] = best_p
        # Points no damping level could improve are stuck; retire them and
        # let fail_tol classify them below.
        still = best_err > tol
        still &= improved
        err[active] = best_err
        new_active = active.copy()
        new_active[active] = still
        active = new_active

    converged = err <= fail_tol
    return p.reshape(shape + (2,)), converged.reshape(shape)


# Layer-facing wrappers; the scene module defines Layer with fields a/b.


def point_map(layer, t: float, points: np.ndarray) -> np.ndarray:
    """Canvas position at time t of sprite points of a layer."""
    return blend_point_map(layer.a, layer.b, t, points)


def invert_point_map(
    layer, t: float, targets: np.ndarray, **kwargs
) -> tuple[np.ndarray, np.ndarray]:
    """Sprite points mapping to canvas targets at time t; see invert_blend_map."""
    return invert_blend_map(layer.a, layer.b, t, targets, **kwargs)


def photometric_at(layer, t: float, colors: np.ndarray) -> np.ndarray:
    """Apply the layer's photometric transform with parameters lerped to time t."""
    return lerp_photometric(layer.phot0, layer.phot1, t).apply(colors)
