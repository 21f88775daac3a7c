"""Protocol/attack state model and the dense linear algebra underneath it.

Matrices are plain complex numpy arrays.  The 2d-dimensional output space is
indexed qubit-major: basis label ``u = x*d + s``, so with ``U = V = I`` and
``b = 0`` the output table is the computational-basis indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-10

# Fixed single-qubit gates used throughout.
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
# Control on the first (qubit) factor.
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


class DimensionMismatchError(ValueError):
    """Raised when strategy/protocol dimensions are inconsistent."""


def rotation_matrix(theta):
    """Real 2x2 rotation by ``theta`` (the protocol's encoding rotation)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def kron(a, b):
    """Kronecker product; thin alias kept for a uniform call surface."""
    return np.kron(np.asarray(a), np.asarray(b))


def unitarity_defect(m):
    """max-norm of M†M - I."""
    m = np.asarray(m)
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


def require_unitary(m, tol=DEFAULT_TOL, name="matrix"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    defect = unitarity_defect(m)
    if defect > tol:
        raise ValueError(f"{name} is not unitary: defect {defect:.3e} > {tol:.3e}")
    return m


def project_unitary(m):
    """Nearest unitary (polar factor) of a square matrix."""
    w, _, vh = np.linalg.svd(np.asarray(m, dtype=complex))
    return w @ vh


def phase_aligned_distance(a, b):
    """Frobenius distance between ``a`` and ``b`` minimized over a global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ov = np.trace(a.conj().T @ b)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(a * phase - b))


@dataclass(frozen=True)
class ProtocolSpec:
    """Either a single rotation angle (two bases: 0 and theta) or the
    n-basis variant with equally spaced angles in [0, pi/2)."""

    theta: float | None = None
    n: int | None = None

    def __post_init__(self):
        if (self.theta is None) == (self.n is None):
            raise ValueError("specify exactly one of theta / n")
        if self.theta is not None:
            if not math.isfinite(self.theta):
                raise ValueError("theta must be finite")
            object.__setattr__(self, "theta", self.theta % (2 * math.pi))
        else:
            if self.n < 2:
                raise ValueError("basis count must be >= 2")

    @property
    def n_bases(self):
        return 2 if self.theta is not None else self.n

    def angles(self):
        """Basis angles theta_b, b = 0 .. n_bases-1."""
        if self.theta is not None:
            return [0.0, self.theta]
        return [b * math.pi / (2 * self.n) for b in range(self.n)]

    @staticmethod
    def single(theta):
        return ProtocolSpec(theta=theta)

    @staticmethod
    def multibase(n):
        return ProtocolSpec(n=n)


@dataclass(frozen=True)
class AttackStrategy:
    """A reduced attack: qudit-side unitaries U_b (d x d) and the joint
    unitary V (2d x 2d).  For the two-basis protocol there is a single U;
    U_0 = I is implicit in both cases."""

    d: int
    us: tuple  # U_b for b >= 1, each d x d
    v: np.ndarray  # 2d x 2d

    def __init__(self, d, u=None, v=None, us=None, tol=DEFAULT_TOL):
        if d < 1:
            raise DimensionMismatchError("d must be >= 1")
        if us is None:
            us = (u,) if u is not None else ()
        us = tuple(require_unitary(m, tol, f"U_{i+1}") for i, m in enumerate(us))
        for m in us:
            if m.shape != (d, d):
                raise DimensionMismatchError(f"U must be {d}x{d}, got {m.shape}")
        v = require_unitary(v, tol, "V")
        if v.shape != (2 * d, 2 * d):
            raise DimensionMismatchError(f"V must be {2*d}x{2*d}, got {v.shape}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "v", v)

    @property
    def u(self):
        if len(self.us) != 1:
            raise ValueError("strategy has multiple basis unitaries; use .us")
        return self.us[0]

    def basis_unitary(self, b):
        """U_b with the U_0 = I convention."""
        if b == 0:
            return np.eye(self.d, dtype=complex)
        return self.us[b - 1]


@dataclass(frozen=True)
class SpacetimeStrategy:
    """Unreduced attack: V' on (qubit x Alice half), W_0/W_1 on Bob's half."""

    d: int
    v_prime: np.ndarray
    w0: np.ndarray
    w1: np.ndarray

    def __init__(self, d, v_prime, w0, w1, tol=DEFAULT_TOL):
        v_prime = require_unitary(v_prime, tol, "V'")
        w0 = require_unitary(w0, tol, "W0")
        w1 = require_unitary(w1, tol, "W1")
        if v_prime.shape != (2 * d, 2 * d) or w0.shape != (d, d) or w1.shape != (d, d):
            raise DimensionMismatchError("inconsistent spacetime strategy dimensions")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "v_prime", v_prime)
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w1", w1)


@dataclass(frozen=True)
class OutputStateTable:
    """Amplitudes <u| psi_b(x, s) indexed [b, x, s, u]."""

    d: int
    n_bases: int
    amplitudes: np.ndarray = field(repr=False)

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def validate(self, tol=DEFAULT_TOL):
        """Check normalization and, per basis value, pairwise orthogonality."""
        d, nb = self.d, self.n_bases
        amp = self.amplitudes
        norms = np.sum(np.abs(amp) ** 2, axis=-1)
        if np.abs(norms - 1.0).max() > tol:
            raise ValueError("output states are not normalized")
        flat = amp.reshape(nb, 2 * d, 2 * d)  # (b, xs, u)
        for b in range(nb):
            gram = flat[b] @ flat[b].conj().T
            if np.abs(gram - np.eye(2 * d)).max() > tol:
                raise ValueError(f"states at b={b} are not orthonormal")


def output_states(strategy, protocol):
    """Amplitude table of the reduced circuit against a protocol.

    amplitudes[b, x, s, u] = <u| V (R_{theta_b} (x) U_b) (|x> (x) |s>).
    """
    d = strategy.d
    angles = protocol.angles()
    n_needed = len(angles) - 1
    if len(strategy.us) != n_needed:
        raise DimensionMismatchError(
            f"protocol with {len(angles)} bases needs {n_needed} qudit unitaries, "
            f"strategy has {len(strategy.us)}"
        )
    amp = np.empty((len(angles), 2, d, 2 * d), dtype=complex)
    for b, theta_b in enumerate(angles):
        bmat = strategy.v @ kron(rotation_matrix(theta_b), strategy.basis_unitary(b))
        # column index of |x> (x) |s> is x*d + s; amplitude vector is that column
        amp[b] = bmat.T.reshape(2, d, 2 * d)
    return OutputStateTable(d=d, n_bases=len(angles), amplitudes=amp)


def reduce_spacetime(st):
    """Collapse the two-sided attack to its single-sided (U, V) form."""
    u = (st.w1 @ st.w0.conj().T).T
    v = st.v_prime @ kron(np.eye(2), st.w0.T)
    return AttackStrategy(d=st.d, u=u, v=v)


def simulate_spacetime(st, theta):
    """Simulate the unreduced circuit directly.

    Returns ``(joint, p_success)`` where ``joint[b, x, s, u]`` is the full
    outcome distribution (uniform b, x and maximally entangled resource) and
    ``p_success`` is the best achievable guessing probability for x.
    """
    d = st.d
    joint = np.empty((2, 2, d, 2 * d))
    for b in range(2):
        wb = st.w0 if b == 0 else st.w1
        for x in range(2):
            q = rotation_matrix(theta if b else 0.0)[:, x]
            # amp[u, s] = (1/sqrt d) sum_t <u|V'(q (x) |t>) <s|W_b|t>
            amp = (st.v_prime @ kron(q[:, None], np.eye(d))) @ wb.T / math.sqrt(d)
            joint[b, x] = (np.abs(amp) ** 2).T / 4.0  # p(x)=p(b)=1/2
    p_success = float(np.sum(np.max(joint, axis=1)))
    return joint, p_success


# -- nonlocal two-qubit invariants -------------------------------------------

# Columns are the maximally entangled ("magic") basis states.
_MAGIC = np.array(
    [
        [1, -1j, 0, 0],
        [0, 0, 1, -1j],
        [0, 0, -1, -1j],
        [1, 1j, 0, 0],
    ],
    dtype=complex,
) / math.sqrt(2)


def u_theta_gate(theta):
    """The nonlocal two-qubit gate realized by the protocol round:
    CNOT (I (x) |0><0| + R_{-theta} (x) |1><1|)."""
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return CNOT @ (kron(I2, p0) + kron(rotation_matrix(-theta), p1))


def kak_nonlocal_params(g, tol=1e-8):
    """Canonicalized nonlocal (Weyl chamber) parameters of a 4x4 unitary.

    Returns three angles folded into [0, pi/4], sorted ascending.  Local
    factors are not returned; two gates equal up to single-qubit unitaries
    map to the same triple.
    """
    g = require_unitary(np.asarray(g, dtype=complex), tol, "G")
    if g.shape != (4, 4):
        raise DimensionMismatchError("expected a 4x4 unitary")
    mg = _MAGIC.conj().T @ g @ _MAGIC
    mg = mg / np.linalg.det(mg) ** 0.25
    lam = np.linalg.eigvals(mg.T @ mg)
    phases = np.angle(lam) / 2.0
    # Any assignment of the four eigenphases yields a locally equivalent
    # parameter triple; folding removes the leftover pi/2 ambiguities.
    p1, p2, p3, p4 = phases
    raw = np.array([(p1 + p2) / 2, (p2 + p4) / 2, (p1 + p4) / 2])
    folded = np.mod(raw, math.pi / 2)
    folded = np.minimum(folded, math.pi / 2 - folded)
    return tuple(sorted(float(v) for v in folded))


def teleport_attack(theta=math.pi / 4):
    """The one-ebit strategy derived from the teleportation attack: exact at
    theta = pi/4, error sin^2(theta/2 - pi/8) on [pi/8, pi/4].

    In this basis ordering the joint unitary does not factor through a plain
    CNOT conjugation; it is written out directly with c, s the cosine/sine of
    the compromise angle pi/8 - theta/2.
    """
    phi = math.pi / 8 - theta / 2
    c, s = math.cos(phi), math.sin(phi)
    v = np.array(
        [
            [-s, -c, -c, s],
            [s, -c, c, s],
            [-c, s, s, c],
            [c, s, -s, c],
        ],
        dtype=complex,
    ) / math.sqrt(2)
    return AttackStrategy(d=2, u=rotation_matrix(math.pi / 4), v=v)


def teleport_spacetime():
    """Unreduced form of the teleportation attack at theta = pi/4: a Bell
    measurement on Alice's side, basis pre-rotation on Bob's."""
    v_prime = kron(H, I2) @ CNOT
    return SpacetimeStrategy(
        d=2, v_prime=v_prime, w0=np.eye(2, dtype=complex),
        w1=rotation_matrix(-math.pi / 4),
    )
