"""Descent-based minimization of the attack error over unitary pairs.

Unitaries are parametrized through retractions of skew generators (Cayley
transform or matrix exponential), the error probability is differentiated
analytically through the active min-branch, and a multistart quasi-Newton
loop provides the global picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, expm_frechet
from scipy.optimize import minimize

from . import errmodel
from .qcore import AttackStrategy, ProtocolSpec, rotation_matrix

RETRACTION_KINDS = ("cayley", "exponential")
CAYLEY_CONDITION_LIMIT = 1e12
UNITARY_TOL = 1e-10


# -- skew parametrization and retractions -------------------------------------

def coords_dim(m, mode):
    """Number of real coordinates of a skew generator of size m."""
    if mode == "real":
        return m * (m - 1) // 2
    return m * m


def skew_from_coords(coords, m, mode):
    """Assemble the skew-symmetric (real) or skew-Hermitian (complex)
    generator from its free real coordinates."""
    coords = np.asarray(coords, dtype=float)
    k = m * (m - 1) // 2
    iu = np.triu_indices(m, 1)
    if mode == "real":
        a = np.zeros((m, m))
        a[iu] = coords[:k]
        return a - a.T
    a = np.zeros((m, m), dtype=complex)
    a[iu] = coords[:k]
    a = a - a.T
    s = np.zeros((m, m))
    s[iu] = coords[k : 2 * k]
    s = s + s.T
    np.fill_diagonal(s, coords[2 * k :])
    return a + 1j * s


def coords_from_skew(a, mode):
    """Inverse of skew_from_coords."""
    m = a.shape[0]
    iu = np.triu_indices(m, 1)
    if mode == "real":
        return np.real(a)[iu].copy()
    return np.concatenate([np.real(a)[iu], np.imag(a)[iu], np.imag(np.diag(a))])


def retract(a, kind):
    """Map a skew generator to the unitary (orthogonal) group."""
    m = a.shape[0]
    eye = np.eye(m)
    if kind == "cayley":
        return np.linalg.solve(eye + a, eye - a)
    if kind == "exponential":
        return expm(a)
    raise ValueError(f"unknown retraction kind {kind!r}")


def _generator_gradient(a, q, g, kind):
    """Pull the Wirtinger gradient g = df/dconj(Q) back through the
    retraction; returns M with df = 2 Re tr(M^H dA)."""
    m = a.shape[0]
    eye = np.eye(m)
    if kind == "cayley":
        # dQ = -(I+A)^{-1} dA (Q + I)
        lhs = np.linalg.solve((eye + a).conj().T, g)
        return -lhs @ (q + eye).conj().T
    # d expm: tr(G^H L_A(dA)) = tr(L_{A^H}(G)^H dA)
    return expm_frechet(a.conj().T, g, compute_expm=False)


def _coords_gradient(mat, mode):
    """Project the generator gradient onto the free coordinates."""
    m = mat.shape[0]
    iu = np.triu_indices(m, 1)
    anti = 2.0 * np.real(mat - mat.T)[iu]
    if mode == "real":
        return anti
    sym = 2.0 * np.imag(mat + mat.T)[iu]
    diag = 2.0 * np.imag(np.diag(mat))
    return np.concatenate([anti, sym, diag])


# -- objective ----------------------------------------------------------------

def _layout(d, n_bases, mode):
    """Coordinate layout: V block first, then one U block per basis b >= 1."""
    nv = coords_dim(2 * d, mode)
    nu = coords_dim(d, mode)
    return nv, nu, nv + (n_bases - 1) * nu


def n_coords(d, protocol, mode="complex"):
    return _layout(d, protocol.n_bases, mode)[2]


def unpack_strategy(coords, d, protocol, kind="cayley", mode="complex"):
    """Retract a coordinate vector into an AttackStrategy."""
    nv, nu, total = _layout(d, protocol.n_bases, mode)
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (total,):
        raise ValueError(f"expected {total} coordinates, got {coords.shape}")
    v = retract(skew_from_coords(coords[:nv], 2 * d, mode), kind)
    us = []
    for j in range(protocol.n_bases - 1):
        block = coords[nv + j * nu : nv + (j + 1) * nu]
        us.append(retract(skew_from_coords(block, d, mode), kind))
    return AttackStrategy(
        d=d, us=tuple(u.astype(complex) for u in us), v=v.astype(complex)
    )


def objective_and_gradient(coords, d, protocol, kind="cayley", mode="complex"):
    """Error probability and its analytic gradient in the coordinates.

    The min over the two input bits is differentiated along the active
    branch; at exact ties the x=0 branch is taken.
    """
    nv, nu, total = _layout(d, protocol.n_bases, mode)
    coords = np.asarray(coords, dtype=float)
    angles = protocol.angles()
    n = len(angles)
    scale = 1.0 / (2.0 * n * d)

    a_v = skew_from_coords(coords[:nv], 2 * d, mode)
    v = retract(a_v, kind)
    a_us, us = [], []
    for j in range(n - 1):
        block = coords[nv + j * nu : nv + (j + 1) * nu]
        a_u = skew_from_coords(block, d, mode)
        a_us.append(a_u)
        us.append(retract(a_u, kind))

    value = 0.0
    g_v = np.zeros((2 * d, 2 * d), dtype=complex)
    g_us = []
    v0, v1 = v[:, :d], v[:, d:]
    for b, theta in enumerate(angles):
        if b == 0:
            b0, b1 = v0, v1
        else:
            c, s = math.cos(theta), math.sin(theta)
            u = us[b - 1]
            # V (R ⊗ U) written through the qubit-index blocks of V
            w0 = c * v0 + s * v1
            w1 = -s * v0 + c * v1
            b0, b1 = w0 @ u, w1 @ u
        p0 = b0.real**2 + b0.imag**2
        p1 = b1.real**2 + b1.imag**2
        active1 = p1 < p0  # ties go to x = 0
        value += np.where(active1, p1, p0).sum()
        # df/dconj(amp) = scale * amp on the active entries, 0 elsewhere
        g0 = np.where(active1, 0.0, b0) * scale
        g1 = np.where(active1, b1, 0.0) * scale
        if b == 0:
            g_v[:, :d] += g0
            g_v[:, d:] += g1
        else:
            uh = u.conj().T
            gw0, gw1 = g0 @ uh, g1 @ uh
            g_v[:, :d] += c * gw0 - s * gw1
            g_v[:, d:] += s * gw0 + c * gw1
            g_us.append(w0.conj().T @ g0 + w1.conj().T @ g1)

    grad = np.empty(total)
    grad[:nv] = _coords_gradient(
        _generator_gradient(a_v, v, g_v, kind), mode
    )
    for j in range(n - 1):
        grad[nv + j * nu : nv + (j + 1) * nu] = _coords_gradient(
            _generator_gradient(a_us[j], us[j], g_us[j], kind), mode
        )
    return float(value * scale), grad


# -- multistart minimization --------------------------------------------------

@dataclass(frozen=True)
class ApproxConfig:
    restarts: int = 1000
    kind: str = "cayley"
    mode: str = "complex"
    seed: int = 0
    maxiter: int = 200
    gtol: float = 1e-12

    def __post_init__(self):
        if self.kind not in RETRACTION_KINDS:
            raise ValueError(f"kind must be one of {RETRACTION_KINDS}")
        if self.mode not in ("real", "complex"):
            raise ValueError("mode must be 'real' or 'complex'")


@dataclass(frozen=True)
class SearchResult:
    d: int
    p_err: float
    strategy: AttackStrategy
    coords: np.ndarray = field(repr=False)
    per_restart: np.ndarray = field(repr=False)
    best_restart: int = 0
    seed: int = 0


def _sample_start(rng, d, n_bases, kind, mode):
    """Gaussian start; Cayley starts too close to the transform's pole are
    resampled."""
    nv, nu, total = _layout(d, n_bases, mode)
    for _ in range(100):
        x = rng.standard_normal(total)
        if kind != "cayley":
            return x
        a = skew_from_coords(x[:nv], 2 * d, mode)
        if np.linalg.cond(np.eye(2 * d) + a) < CAYLEY_CONDITION_LIMIT:
            return x
    return x


def minimize_p_err(d, protocol, config=None, extra_starts=()):
    """Multistart quasi-Newton minimization of the error probability.

    extra_starts are prepended to the random starts (used for warm starts
    during sweeps) and count toward the per-restart bookkeeping.
    """
    config = config or ApproxConfig()
    fun = lambda x: objective_and_gradient(
        x, d, protocol, kind=config.kind, mode=config.mode
    )
    best = (math.inf, None, -1)
    per_restart = []
    starts = list(extra_starts)
    for idx in range(config.restarts):
        rng = np.random.default_rng([config.seed, idx])
        starts.append(
            _sample_start(rng, d, protocol.n_bases, config.kind, config.mode)
        )
    for idx, x0 in enumerate(starts):
        res = minimize(
            fun, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": config.maxiter, "gtol": config.gtol,
                     "ftol": 1e-16},
        )
        per_restart.append(res.fun)
        if res.fun < best[0]:
            best = (res.fun, res.x, idx)
    strategy = unpack_strategy(
        best[1], d, protocol, kind=config.kind, mode=config.mode
    )
    # report the value recomputed through the independent error-model path
    value = errmodel.p_err(strategy, protocol).p_err
    return SearchResult(
        d=d, p_err=value, strategy=strategy, coords=best[1],
        per_restart=np.array(per_restart), best_restart=best[2],
        seed=config.seed,
    )


# -- theta sweeps -------------------------------------------------------------

def default_grid(points=129):
    return np.linspace(0.0, math.pi / 4, points)


@dataclass(frozen=True)
class SweepResult:
    d: int
    thetas: np.ndarray
    p_err: np.ndarray
    strategies: tuple = field(repr=False)
    restarts: int = 0
    seed: int = 0
    warm_start: np.ndarray = field(default=None, repr=False)

    def to_rows(self):
        for i, t in enumerate(self.thetas):
            yield {
                "theta": float(t),
                "p_err": float(self.p_err[i]),
                "d": self.d,
                "restarts": self.restarts,
                "seed": self.seed,
                "warm_start": int(self.warm_start[i]),
            }


def sweep_theta(d, thetas=None, config=None, warm_start=True):
    """Minimize the error on a grid of protocol angles.

    With warm_start, the previous angle's optimum seeds one extra descent
    at the next angle; warmed entries are flagged in the result.
    """
    config = config or ApproxConfig()
    thetas = default_grid() if thetas is None else np.sort(np.asarray(thetas, float))
    values, strategies, warmed = [], [], []
    prev_coords = None
    for t in thetas:
        extra = [prev_coords] if (warm_start and prev_coords is not None) else []
        res = minimize_p_err(d, ProtocolSpec.single(float(t)), config,
                             extra_starts=extra)
        values.append(res.p_err)
        strategies.append(res.strategy)
        warmed.append(bool(extra))
        prev_coords = res.coords
    return SweepResult(
        d=d, thetas=thetas, p_err=np.array(values),
        strategies=tuple(strategies), restarts=config.restarts,
        seed=config.seed, warm_start=np.array(warmed),
    )


def minimize_multibase(d, n, config=None):
    """Jointly optimize V and the n-1 non-trivial basis unitaries."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return minimize_p_err(d, ProtocolSpec.multibase(n), config)
