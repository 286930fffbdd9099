"""Unitary mode transforms and their triangular (Reck) mesh factorisation.

Matrices act on column vectors of input-mode coefficients: ``out = U @ in``,
so ``U[k, j]`` is the amplitude for input mode ``j`` to leave in mode ``k``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ValidationError

UNITARY_TOL = 1e-12
MESH_TOL = 1e-10


def is_unitary(m, tol=UNITARY_TOL):
    """Return ``(ok, deviation)`` with deviation = max |M^dagger M - I|."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    dev = float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))) if m.size else 0.0
    return dev <= tol, dev


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """Square complex matrix checked for unitarity at construction."""

    entries: np.ndarray
    tol: float = UNITARY_TOL
    deviation: float = field(init=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValidationError(f"unitary matrix must be square and non-empty, got shape {m.shape}")
        ok, dev = is_unitary(m, self.tol)
        if not ok:
            raise ValidationError(f"matrix is not unitary: max |U^dagger U - I| = {dev:.3e} > {self.tol:.1e}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "deviation", dev)

    @property
    def dim(self):
        return self.entries.shape[0]

    def __matmul__(self, other):
        if not isinstance(other, UnitaryMatrix):
            return NotImplemented
        return UnitaryMatrix(self.entries @ other.entries, tol=max(self.tol, other.tol))

    def __eq__(self, other):
        if not isinstance(other, UnitaryMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"UnitaryMatrix(dim={self.dim}, deviation={self.deviation:.1e})"


def paper_beam_splitter():
    """50:50 splitter with output 1 = (-a1 + a2)/sqrt2, output 2 = (a1 + a2)/sqrt2."""
    s = 1 / math.sqrt(2)
    return UnitaryMatrix(np.array([[-s, s], [s, s]], dtype=complex))


def apply_transform(u, amps):
    amps = np.asarray(amps, dtype=complex)
    if amps.shape != (u.dim,):
        raise ParameterError(f"amplitude vector of shape {amps.shape} does not match dim {u.dim}")
    return u.entries @ amps


def random_unitary(dim, seed=None):
    """Haar-random unitary from the QR factorisation of a complex Gaussian matrix."""
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return UnitaryMatrix(q * (d / np.abs(d)))


# -- Reck mesh ---------------------------------------------------------------

@dataclass(frozen=True)
class MeshStage:
    """Two-mode mixer acting on modes ``(mode_i, mode_j)``.

    Block matrix ``[[e^{i phase} cos a, -sin a], [e^{i phase} sin a, cos a]]``
    with ``a`` the mixing angle.
    """

    mode_i: int
    mode_j: int
    mixing_angle: float
    phase: float

    def block(self):
        c, s = math.cos(self.mixing_angle), math.sin(self.mixing_angle)
        e = complex(math.cos(self.phase), math.sin(self.phase))
        return np.array([[e * c, -s], [e * s, c]], dtype=complex)


@dataclass(frozen=True)
class MeshPlan:
    """Stages in the order they act on the input, then output phases."""

    dim: int
    stages: tuple
    phases: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"mesh dimension must be >= 1, got {self.dim}")
        if len(self.phases) != self.dim:
            raise ParameterError(f"expected {self.dim} output phases, got {len(self.phases)}")
        for k, st in enumerate(self.stages):
            i, j = st.mode_i, st.mode_j
            if i == j or not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ParameterError(f"stage {k} references invalid modes ({i}, {j}) for dim {self.dim}")


def _embed(stage, dim):
    m = np.eye(dim, dtype=complex)
    b = stage.block()
    i, j = stage.mode_i, stage.mode_j
    m[i, i], m[i, j], m[j, i], m[j, j] = b[0, 0], b[0, 1], b[1, 0], b[1, 1]
    return m


def reck_decompose(u):
    """Factor ``u`` as ``diag(e^{i phases}) @ T_K @ ... @ T_1``.

    Row by row from the bottom, each sub-diagonal entry is nulled by mixing
    neighbouring columns; what remains is diagonal.
    """
    if not isinstance(u, UnitaryMatrix):
        u = UnitaryMatrix(u, tol=MESH_TOL)
    ok, dev = is_unitary(u.entries, MESH_TOL)
    if not ok:
        raise ValidationError(f"cannot decompose a non-unitary matrix (deviation {dev:.3e})")
    n = u.dim
    w = np.array(u.entries, dtype=complex)
    stages = []
    for row in range(n - 1, 0, -1):
        for col in range(row):
            a, b = w[row, col], w[row, col + 1]
            if abs(a) == 0.0:
                theta, phi = 0.0, 0.0
            else:
                theta = math.atan2(abs(a), abs(b))
                phi = float(np.angle(a) - np.angle(b)) if abs(b) > 0 else 0.0
            stage = MeshStage(col, col + 1, theta, phi)
            w = w @ _embed(stage, n).conj().T
            w[row, col] = 0.0
            stages.append(stage)
    phases = tuple(float(x) for x in np.angle(np.diagonal(w)))
    return MeshPlan(n, tuple(stages), phases)


def reck_reconstruct(plan):
    m = np.eye(plan.dim, dtype=complex)
    for stage in plan.stages:
        m = _embed(stage, plan.dim) @ m
    m = np.exp(1j * np.asarray(plan.phases, dtype=float))[:, None] * m
    return UnitaryMatrix(m, tol=MESH_TOL)
