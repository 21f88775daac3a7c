"""Attack quality: error probability, exactness predicate, decoder synthesis,
the balanced-weight invariant, and closed-form baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qcore import AttackStrategy, ProtocolSpec, output_states

DDC_TOL = 1e-10
EXACT_THRESHOLD = 1e-12
DECODER_THRESHOLD = 1e-14


@dataclass(frozen=True)
class ErrorReport:
    """p_err together with its per-outcome breakdown."""

    p_err: float
    contributions: np.ndarray = field(repr=False)  # indexed (b, s, u)
    n_bases: int = 2
    d: int = 1

    @property
    def is_exact(self):
        return self.p_err < EXACT_THRESHOLD

    def to_json_dict(self):
        return {
            "p_err": self.p_err,
            "is_exact": bool(self.is_exact),
            "d": self.d,
            "n_bases": self.n_bases,
        }


@dataclass(frozen=True)
class Decoder:
    """Classical readout map (b, s, u) -> x; unreachable outcomes flagged."""

    d: int
    n_bases: int
    table: np.ndarray = field(repr=False)  # int, -1 where unreachable
    reachable: np.ndarray = field(repr=False)  # bool, same shape

    def __call__(self, b, s, u):
        if not self.reachable[b, s, u]:
            raise KeyError(f"outcome (b={b}, s={s}, u={u}) is unreachable")
        return int(self.table[b, s, u])


class DecoderConflictError(ValueError):
    """Both input bits are consistent with some outcome: no exact decoder."""

    def __init__(self, conflicts):
        self.conflicts = conflicts
        head = ", ".join(f"(b={b}, s={s}, u={u})" for b, s, u in conflicts[:5])
        more = "" if len(conflicts) <= 5 else f" and {len(conflicts) - 5} more"
        super().__init__(f"ambiguous outcomes: {head}{more}")


def p_err(strategy: AttackStrategy, protocol: ProtocolSpec, table=None) -> ErrorReport:
    """Average error probability of the best classical decoder.

    (1 / (2 * n_bases * d)) * sum over (b, s, u) of the smaller of the two
    outcome probabilities.
    """
    if table is None:
        table = output_states(strategy, protocol)
    p = table.probabilities()  # (b, x, s, u)
    contrib = np.minimum(p[:, 0], p[:, 1])  # (b, s, u)
    value = float(contrib.sum() / (2 * table.n_bases * table.d))
    return ErrorReport(
        p_err=value, contributions=contrib, n_bases=table.n_bases, d=table.d
    )


def ddc_satisfied(strategy, protocol, tol=DDC_TOL, table=None):
    """Whether every outcome pins down x.  Returns (ok, worst violation)."""
    if table is None:
        table = output_states(strategy, protocol)
    amp = table.amplitudes
    worst = float(np.abs(amp[:, 0] * amp[:, 1]).max())
    return worst <= tol, worst


def synthesize_decoder(strategy, protocol, tol=DDC_TOL, table=None) -> Decoder:
    """Build the classical map f(b, s, u) = x from an exact strategy."""
    if table is None:
        table = output_states(strategy, protocol)
    p = table.probabilities()  # (b, x, s, u)
    reach = p > DECODER_THRESHOLD
    conflict = reach[:, 0] & reach[:, 1]
    if conflict.any():
        idx = np.argwhere(conflict)
        raise DecoderConflictError([tuple(int(v) for v in bsu) for bsu in idx])
    reachable = reach[:, 0] | reach[:, 1]
    decode = np.where(reach[:, 1], 1, np.where(reach[:, 0], 0, -1))
    return Decoder(
        d=table.d, n_bases=table.n_bases, table=decode, reachable=reachable
    )


def balanced_check(strategy, protocol, table=None):
    """Largest deviation of the per-outcome weight sum_s |amp|^2 from 1/2.

    Exact attacks on non-classical protocols satisfy this with deviation 0.
    """
    if table is None:
        table = output_states(strategy, protocol)
    weights = table.probabilities().sum(axis=2)  # (b, x, u)
    return float(np.abs(weights - 0.5).max())


# -- closed-form baselines ---------------------------------------------------

def pgm_p_err(theta):
    """No-entanglement intermediate-basis measurement: sin^2(theta/2)."""
    return math.sin(theta / 2) ** 2


def teleport_d2_p_err(theta):
    """One-ebit modified teleportation strategy: sin^2(theta/2 - pi/8)."""
    return math.sin(theta / 2 - math.pi / 8) ** 2


def d2_piecewise_p_err(theta):
    """Best one-ebit error on [0, pi/4]: the better of the two baselines."""
    return min(pgm_p_err(theta), teleport_d2_p_err(theta))


def multibase_d1_p_err(n):
    """Optimal unentangled error against the n-basis protocol:
    (1/2) * (1 - (1/n) / sin(pi / (2n)))."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 0.5 * (1.0 - 1.0 / (n * math.sin(math.pi / (2 * n))))
