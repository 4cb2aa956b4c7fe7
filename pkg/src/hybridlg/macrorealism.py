"""Multi-time joint probabilities and the statistical macrorealism conditions.

Outcomes q_i = +-1 of sigma_y are recorded at t_0 = 0, t_1 = t, t_2 = 2t.
With rho(0) = P_+ and the normalized conditioned states rho~_{q}(tau)
(projector P_q evolved for tau, renormalized), the distributions are built
multiplicatively from single-step probabilities:

    P(q0, q1, q2) = Tr(P_{q2} rho~_{q1}(t)) Tr(P_{q1} rho~_{q0}(t)) Tr(P_{q0} rho(0))
    P(q0, q1)     = Tr(P_{q1} rho~_{q0}(t))  Tr(P_{q0} rho(0))
    P(q0, q2)     = Tr(P_{q2} rho~_{q0}(2t)) Tr(P_{q0} rho(0))
    P(q1, q2)     = Tr(P_{q2} rho~_{q1}(t))  Tr(P_{q1} rho~(t))

and singles from rho~(0), rho~(t), rho~(2t).  Arrow-of-time consistency
(later measurements leave earlier statistics untouched) holds identically for
this construction; the no-signaling-in-time conditions are generically
violated and the Delta quantifiers below measure by how much.  Raw
probabilities are never clamped in arithmetic; clamping would mask genuine
signaling defects.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import model
from .dynamics import Propagator
from .errors import TrajectoryExtinguishedError

OUTCOMES = (+1, -1)


@dataclass(frozen=True)
class JointProbTable:
    """All single, pair and triple outcome distributions at interval t."""

    t: float
    singles: dict    # {time index: {outcome: prob}}
    pairs: dict      # {(i, j): {(qi, qj): prob}}
    triples: dict    # {(q0, q1, q2): prob}

    def sum_triples(self) -> float:
        return float(sum(self.triples.values()))


def _probability(projector, rho) -> float:
    return float(np.trace(projector @ rho).real)


def _normalized(rho, eps_trace, context):
    trace = float(np.trace(rho).real)
    if trace < eps_trace:
        raise TrajectoryExtinguishedError(trace, context=context)
    return rho / trace


def joint_probabilities(params: model.ModelParams, t, eps_trace=1e-12,
                        propagator=None) -> JointProbTable:
    """Evaluate every distribution of the three-time protocol at interval t."""
    if not t > 0:
        raise ValueError(f"expected t > 0, got {t}")
    if propagator is not None and propagator.params != params:
        raise ValueError(
            f"propagator was built for {propagator.params}, not {params}")
    prop = propagator if propagator is not None else Propagator(params)

    rho0 = model.INITIAL_STATE
    branch_t = {}
    branch_2t = {}
    for outcome in OUTCOMES:
        raw_t, raw_2t = prop.states(model.PROJECTORS[outcome], [t, 2.0 * t])
        branch_t[outcome] = _normalized(
            raw_t, eps_trace, f"branch {outcome:+d} at t")
        branch_2t[outcome] = _normalized(
            raw_2t, eps_trace, f"branch {outcome:+d} at 2t")
    # rho(0) = P_+, so the unconditioned evolved state is the + branch
    state_t = branch_t[+1]
    state_2t = branch_2t[+1]

    singles = {
        0: {s: _probability(model.PROJECTORS[s], rho0) for s in OUTCOMES},
        1: {s: _probability(model.PROJECTORS[s], state_t) for s in OUTCOMES},
        2: {s: _probability(model.PROJECTORS[s], state_2t) for s in OUTCOMES},
    }
    pairs = {
        (0, 1): {
            (q0, q1): _probability(model.PROJECTORS[q1], branch_t[q0])
            * singles[0][q0]
            for q0, q1 in itertools.product(OUTCOMES, repeat=2)
        },
        (0, 2): {
            (q0, q2): _probability(model.PROJECTORS[q2], branch_2t[q0])
            * singles[0][q0]
            for q0, q2 in itertools.product(OUTCOMES, repeat=2)
        },
        (1, 2): {
            (q1, q2): _probability(model.PROJECTORS[q2], branch_t[q1])
            * singles[1][q1]
            for q1, q2 in itertools.product(OUTCOMES, repeat=2)
        },
    }
    triples = {
        (q0, q1, q2): _probability(model.PROJECTORS[q2], branch_t[q1])
        * _probability(model.PROJECTORS[q1], branch_t[q0])
        * singles[0][q0]
        for q0, q1, q2 in itertools.product(OUTCOMES, repeat=3)
    }
    return JointProbTable(t=float(t), singles=singles, pairs=pairs,
                          triples=triples)


@dataclass(frozen=True)
class AotReport:
    """Arrow-of-time defects: later marginals must reproduce earlier stats."""

    two_time: dict   # {(i, j): {qi: defect}} for P(qi) vs sum_qj P(qi, qj)
    three_time: dict  # {(q0, q1): defect} for P(q0,q1) vs sum_q2 P(q0,q1,q2)
    max_defect: float


def check_aot(table: JointProbTable) -> AotReport:
    """Evaluate every arrow-of-time identity; defects are absolute values."""
    two_time = {}
    for (i, j), dist in table.pairs.items():
        two_time[(i, j)] = {
            qi: abs(table.singles[i][qi] - sum(dist[(qi, qj)] for qj in OUTCOMES))
            for qi in OUTCOMES
        }
    three_time = {
        (q0, q1): abs(
            table.pairs[(0, 1)][(q0, q1)]
            - sum(table.triples[(q0, q1, q2)] for q2 in OUTCOMES)
        )
        for q0, q1 in itertools.product(OUTCOMES, repeat=2)
    }
    worst = max(
        max(d for per in two_time.values() for d in per.values()),
        max(three_time.values()),
    )
    return AotReport(two_time=two_time, three_time=three_time,
                     max_defect=float(worst))


@dataclass(frozen=True)
class MacrorealismReport:
    """No-signaling-in-time defects plus the arrow-of-time report.

    ``delta_two_time[(i, j)][qj]`` is |P(qj) - sum_qi P(qi, qj)| (an earlier
    unread measurement at t_i should not shift the t_j marginal);
    ``delta_marginal_middle[(q0, q2)]`` marginalizes the intermediate
    measurement out of the triple, ``delta_marginal_first[(q1, q2)]`` the
    initial one.
    """

    aot: AotReport
    delta_two_time: dict
    delta_marginal_middle: dict
    delta_marginal_first: dict

    def max_delta_two_time(self, pair) -> float:
        return float(max(self.delta_two_time[pair].values()))

    @property
    def max_delta_marginal_middle(self) -> float:
        return float(max(self.delta_marginal_middle.values()))

    @property
    def max_delta_marginal_first(self) -> float:
        return float(max(self.delta_marginal_first.values()))


def check_nsit(table: JointProbTable) -> MacrorealismReport:
    """Quantify every no-signaling-in-time violation of the table."""
    delta_two_time = {}
    for (i, j), dist in table.pairs.items():
        delta_two_time[(i, j)] = {
            qj: abs(table.singles[j][qj] - sum(dist[(qi, qj)] for qi in OUTCOMES))
            for qj in OUTCOMES
        }
    delta_marginal_middle = {
        (q0, q2): abs(
            table.pairs[(0, 2)][(q0, q2)]
            - sum(table.triples[(q0, q1, q2)] for q1 in OUTCOMES)
        )
        for q0, q2 in itertools.product(OUTCOMES, repeat=2)
    }
    delta_marginal_first = {
        (q1, q2): abs(
            table.pairs[(1, 2)][(q1, q2)]
            - sum(table.triples[(q0, q1, q2)] for q0 in OUTCOMES)
        )
        for q1, q2 in itertools.product(OUTCOMES, repeat=2)
    }
    return MacrorealismReport(
        aot=check_aot(table),
        delta_two_time=delta_two_time,
        delta_marginal_middle=delta_marginal_middle,
        delta_marginal_first=delta_marginal_first,
    )


def correlator_from_pair(table: JointProbTable, pair=(1, 2)) -> float:
    """Two-time correlator sum_{a,b} a b P(q_i=a, q_j=b) from the table."""
    dist = table.pairs[pair]
    return float(sum(a * b * dist[(a, b)] for a, b in dist))
