"""Stochastic 3D vessel centerlines.

A centerline is a unit-speed space curve obtained by integrating the
Frenet-Serret frame equations

    r' = T,   T' = kappa * N,   N' = -kappa * T + tau * B,   B' = -tau * N,

with curvature ``kappa`` and torsion ``tau`` supplied by a piecewise-constant
stochastic process whose values are clipped to configured bounds so the
vessel never coils tighter than the clip allows.  Integration uses classical
RK4 on the joint (position, frame) system with a Gram-Schmidt
re-orthonormalization of the frame after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import ValidationError

__all__ = [
    "FrenetState",
    "CurvatureTorsionProcess",
    "VesselCurve",
    "standard_frame",
    "integrate_frenet_serret",
    "recenter_curve",
    "random_rotation",
]

FRAME_TOL = 1e-9


@dataclass(frozen=True)
class FrenetState:
    """Position plus the orthonormal (tangent, normal, binormal) triad."""

    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    binormal: np.ndarray

    def frame_matrix(self) -> np.ndarray:
        """Frame as a 3x3 array with rows (T, N, B)."""
        return np.stack([self.tangent, self.normal, self.binormal]).astype(float)

    def validate(self, tol: float = 1e-8) -> None:
        """Raise ValidationError unless the triad is orthonormal within tol."""
        f = self.frame_matrix()
        if f.shape != (3, 3) or not np.all(np.isfinite(f)):
            raise ValidationError("frame vectors must be finite 3-vectors")
        gram = f @ f.T
        dev = float(np.max(np.abs(gram - np.eye(3))))
        if dev > tol:
            raise ValidationError(
                f"initial frame is not orthonormal (Gram deviation {dev:.3e} > {tol:.1e})"
            )


def standard_frame(position=(0.0, 0.0, 0.0)) -> FrenetState:
    """Canonical start state: axes-aligned frame at the given position."""
    return FrenetState(
        position=np.asarray(position, dtype=float),
        tangent=np.array([1.0, 0.0, 0.0]),
        normal=np.array([0.0, 1.0, 0.0]),
        binormal=np.array([0.0, 0.0, 1.0]),
    )


@dataclass
class CurvatureTorsionProcess:
    """Piecewise-constant curvature/torsion resampled every ``segment_length``.

    Each segment draws kappa uniformly from ``kappa_range`` and tau uniformly
    from ``tau_range``; the drawn values are additionally clipped to those
    ranges, so emitted values never exceed the bounds.  Degenerate ranges
    (lo == hi) give constant processes, which the analytic test cases use.
    """

    kappa_range: tuple[float, float] = (0.0, 0.002)
    tau_range: tuple[float, float] = (-0.002, 0.002)
    segment_length: float = 20.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        for name, (lo, hi) in (("kappa", self.kappa_range), ("tau", self.tau_range)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ValidationError(f"{name}_range must be a finite interval, got ({lo}, {hi})")
        if not self.segment_length > 0:
            raise ValidationError(f"segment_length must be > 0, got {self.segment_length}")

    def values_at(self, arc_lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-position (kappa, tau), constant within each arc-length segment."""
        s = np.asarray(arc_lengths, dtype=float)
        seg = np.floor(s / self.segment_length).astype(np.int64)
        n_seg = int(seg.max()) + 1 if seg.size else 0
        kappa_seg = self.rng.uniform(*self.kappa_range, size=n_seg)
        tau_seg = self.rng.uniform(*self.tau_range, size=n_seg)
        np.clip(kappa_seg, *self.kappa_range, out=kappa_seg)
        np.clip(tau_seg, *self.tau_range, out=tau_seg)
        if not (np.all(np.isfinite(kappa_seg)) and np.all(np.isfinite(tau_seg))):
            raise ValidationError("curvature/torsion process emitted non-finite values")
        return kappa_seg[seg], tau_seg[seg]


@dataclass
class VesselCurve:
    """Arc-length-sampled space curve, optionally carrying thickness values.

    ``arc_lengths`` increase uniformly from 0; ``positions`` is (n, 3).
    ``frames`` holds the integrated (T, N, B) triads, one 3x3 block per
    sample, and is kept mainly so the integration invariants can be checked.
    """

    arc_lengths: np.ndarray
    positions: np.ndarray
    thickness: np.ndarray | None = None
    center_index: int | None = None
    frames: np.ndarray | None = None

    def __post_init__(self):
        self.arc_lengths = np.asarray(self.arc_lengths, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValidationError("positions must be an (n, 3) array")
        if self.arc_lengths.shape[0] != self.positions.shape[0]:
            raise ValidationError("arc_lengths and positions must have equal length")
        if self.thickness is not None:
            self.thickness = np.asarray(self.thickness, dtype=float)
            if self.thickness.shape != self.arc_lengths.shape:
                raise ValidationError("thickness must match the sample count")
            if not np.all(self.thickness > 0):
                raise ValidationError("all thickness values must be > 0")

    @property
    def n_samples(self) -> int:
        return int(self.arc_lengths.shape[0])

    @property
    def total_length(self) -> float:
        return float(self.arc_lengths[-1]) if self.n_samples else 0.0

    @property
    def anchor_position(self) -> np.ndarray:
        if self.center_index is None:
            raise ValidationError("curve has no anchor; recenter it first")
        return self.positions[self.center_index]

    def with_thickness(self, values: np.ndarray) -> "VesselCurve":
        return replace(self, thickness=np.asarray(values, dtype=float))


@njit(cache=True)
def _frenet_rk4(kappas, taus, ds, frame0, pos0):  # pragma: no cover - jitted
    n = kappas.shape[0]
    pos = np.empty((n + 1, 3))
    frames = np.empty((n + 1, 3, 3))
    rx, ry, rz = pos0[0], pos0[1], pos0[2]
    tx, ty, tz = frame0[0, 0], frame0[0, 1], frame0[0, 2]
    nx, ny, nz = frame0[1, 0], frame0[1, 1], frame0[1, 2]
    bx, by, bz = frame0[2, 0], frame0[2, 1], frame0[2, 2]
    pos[0, 0], pos[0, 1], pos[0, 2] = rx, ry, rz
    frames[0, 0, 0], frames[0, 0, 1], frames[0, 0, 2] = tx, ty, tz
    frames[0, 1, 0], frames[0, 1, 1], frames[0, 1, 2] = nx, ny, nz
    frames[0, 2, 0], frames[0, 2, 1], frames[0, 2, 2] = bx, by, bz
    h = ds
    for i in range(n):
        k = kappas[i]
        t = taus[i]
        # stage 1
        dt1x, dt1y, dt1z = k * nx, k * ny, k * nz
        dn1x, dn1y, dn1z = -k * tx + t * bx, -k * ty + t * by, -k * tz + t * bz
        db1x, db1y, db1z = -t * nx, -t * ny, -t * nz
        dr1x, dr1y, dr1z = tx, ty, tz
        # stage 2
        t2x, t2y, t2z = tx + 0.5 * h * dt1x, ty + 0.5 * h * dt1y, tz + 0.5 * h * dt1z
        n2x, n2y, n2z = nx + 0.5 * h * dn1x, ny + 0.5 * h * dn1y, nz + 0.5 * h * dn1z
        b2x, b2y, b2z = bx + 0.5 * h * db1x, by + 0.5 * h * db1y, bz + 0.5 * h * db1z
        dt2x, dt2y, dt2z = k * n2x, k * n2y, k * n2z
        dn2x, dn2y, dn2z = -k * t2x + t * b2x, -k * t2y + t * b2y, -k * t2z + t * b2z
        db2x, db2y, db2z = -t * n2x, -t * n2y, -t * n2z
        dr2x, dr2y, dr2z = t2x, t2y, t2z
        # stage 3
        t3x, t3y, t3z = tx + 0.5 * h * dt2x, ty + 0.5 * h * dt2y, tz + 0.5 * h * dt2z
        n3x, n3y, n3z = nx + 0.5 * h * dn2x, ny + 0.5 * h * dn2y, nz + 0.5 * h * dn2z
        b3x, b3y, b3z = bx + 0.5 * h * db2x, by + 0.5 * h * db2y, bz + 0.5 * h * db2z
        dt3x, dt3y, dt3z = k * n3x, k * n3y, k * n3z
        dn3x, dn3y, dn3z = -k * t3x + t * b3x, -k * t3y + t * b3y, -k * t3z + t * b3z
        db3x, db3y, db3z = -t * n3x, -t * n3y, -t * n3z
        dr3x, dr3y, dr3z = t3x, t3y, t3z
        # stage 4
        t4x, t4y, t4z = tx + h * dt3x, ty + h * dt3y, tz + h * dt3z
        n4x, n4y, n4z = nx + h * dn3x, ny + h * dn3y, nz + h * dn3z
        b4x, b4y, b4z = bx + h * db3x, by + h * db3y, bz + h * db3z
        dt4x, dt4y, dt4z = k * n4x, k * n4y, k * n4z
        dn4x, dn4y, dn4z = -k * t4x + t * b4x, -k * t4y + t * b4y, -k * t4z + t * b4z
        db4x, db4y, db4z = -t * n4x, -t * n4y, -t * n4z
        dr4x, dr4y, dr4z = t4x, t4y, t4z
        # combine
        c = h / 6.0
        rx += c * (dr1x + 2.0 * dr2x + 2.0 * dr3x + dr4x)
        ry += c * (dr1y + 2.0 * dr2y + 2.0 * dr3y + dr4y)
        rz += c * (dr1z + 2.0 * dr2z + 2.0 * dr3z + dr4z)
        tx += c * (dt1x + 2.0 * dt2x + 2.0 * dt3x + dt4x)
        ty += c * (dt1y + 2.0 * dt2y + 2.0 * dt3y + dt4y)
        tz += c * (dt1z + 2.0 * dt2z + 2.0 * dt3z + dt4z)
        nx += c * (dn1x + 2.0 * dn2x + 2.0 * dn3x + dn4x)
        ny += c * (dn1y + 2.0 * dn2y + 2.0 * dn3y + dn4y)
        nz += c * (dn1z + 2.0 * dn2z + 2.0 * dn3z + dn4z)
        bx += c * (db1x + 2.0 * db2x + 2.0 * db3x + db4x)
        by += c * (db1y + 2.0 * db2y + 2.0 * db3y + db4y)
        bz += c * (db1z + 2.0 * db2z + 2.0 * db3z + db4z)
        # Gram-Schmidt; the binormal is rebuilt as T x N so the triad is
        # exactly right-handed after every step.
        inv = 1.0 / math.sqrt(tx * tx + ty * ty + tz * tz)
        tx, ty, tz = tx * inv, ty * inv, tz * inv
        proj = nx * tx + ny * ty + nz * tz
        nx, ny, nz = nx - proj * tx, ny - proj * ty, nz - proj * tz
        inv = 1.0 / math.sqrt(nx * nx + ny * ny + nz * nz)
        nx, ny, nz = nx * inv, ny * inv, nz * inv
        bx = ty * nz - tz * ny
        by = tz * nx - tx * nz
        bz = tx * ny - ty * nx
        pos[i + 1, 0], pos[i + 1, 1], pos[i + 1, 2] = rx, ry, rz
        frames[i + 1, 0, 0], frames[i + 1, 0, 1], frames[i + 1, 0, 2] = tx, ty, tz
        frames[i + 1, 1, 0], frames[i + 1, 1, 1], frames[i + 1, 1, 2] = nx, ny, nz
        frames[i + 1, 2, 0], frames[i + 1, 2, 1], frames[i + 1, 2, 2] = bx, by, bz
    return pos, frames


def integrate_frenet_serret(
    process: CurvatureTorsionProcess,
    total_length: float,
    step: float,
    initial: FrenetState | None = None,
) -> VesselCurve:
    """Integrate the frame equations and return the sampled centerline.

    The curve has ``floor(total_length / step) + 1`` samples.  The actual
    uniform spacing is ``total_length / floor(total_length / step)`` so that
    the final sample lands exactly at ``total_length``; for the production
    case (step dividing total_length) this equals ``step``.

    Thickness is left unset; ``center_index`` is unset until recentering.
    """
    if not step > 0:
        raise ValidationError(f"step must be > 0, got {step}")
    if not total_length >= 2 * step:
        raise ValidationError(f"total_length must be >= 2 * step, got {total_length}")
    state = standard_frame() if initial is None else initial
    state.validate()
    n_steps = int(math.floor(total_length / step + 1e-9))
    arc = np.linspace(0.0, total_length, n_steps + 1)
    ds = total_length / n_steps
    kappas, taus = process.values_at(arc[:-1])
    positions, frames = _frenet_rk4(
        kappas, taus, ds, state.frame_matrix(), np.asarray(state.position, dtype=float)
    )
    return VesselCurve(arc_lengths=arc, positions=positions, frames=frames)


def recenter_curve(
    curve: VesselCurve, anchor_arc_length: float, target_point
) -> VesselCurve:
    """Translate the curve so the sample nearest the anchor sits at the target.

    A rigid translation: all pairwise distances are preserved exactly.  The
    chosen sample becomes ``center_index``.
    """
    if curve.n_samples == 0:
        raise ValidationError("cannot recenter an empty curve")
    if not 0 <= anchor_arc_length <= curve.total_length + 1e-9:
        raise ValidationError(
            f"anchor arc length {anchor_arc_length} outside [0, {curve.total_length}]"
        )
    idx = int(np.argmin(np.abs(curve.arc_lengths - anchor_arc_length)))
    shift = np.asarray(target_point, dtype=float) - curve.positions[idx]
    return replace(curve, positions=curve.positions + shift, center_index=idx)


def _random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation from a normalized Gaussian quaternion."""
    while True:
        q = rng.normal(size=4)
        norm = np.linalg.norm(q)
        if norm > 1e-12:
            break
    w, x, y, z = q / norm
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(curve: VesselCurve, rng: np.random.Generator) -> VesselCurve:
    """Apply a uniformly random 3D rotation about the curve's anchor point."""
    if curve.n_samples == 0:
        raise ValidationError("cannot rotate an empty curve")
    anchor = curve.anchor_position.copy()
    rot = _random_rotation_matrix(rng)
    positions = anchor + (curve.positions - anchor) @ rot.T
    frames = curve.frames @ rot.T if curve.frames is not None else None
    return replace(curve, positions=positions, frames=frames)
