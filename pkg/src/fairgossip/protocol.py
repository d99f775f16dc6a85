"""Core data types and per-agent operations for the gossip consensus protocol.

The protocol elects a single proposal ("color") among n agents on a complete
graph. Between two local phases there are four networked phases of q rounds
each:

  voting-intention   each agent draws q (value, target) vote pairs (local)
  commitment         agents pull each other's intended votes into ledgers
  voting             agents push their vote values to the drawn targets
  find-min           agents pull certificates, keeping the smallest ticket
  coherence          agents push the winning certificate; conflicts abort
  verification       each agent audits the winner against its ledger (local)

Vote values are uniform residues mod ``modulus`` drawn as representatives in
[1, modulus]; the value 0 is reserved for marking voters that did not answer
a pull, so "all votes zero" is an unambiguous statement about a silent peer.

Everything in this module is a pure function or a small per-agent record.
Scheduling, message delivery and fault injection live in ``engine``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

AgentId = int  # 1-based
Color = int    # 1-based; the decision domain is {1, .., num_colors}

#: Ledger value standing in for every vote of a voter that failed to answer.
NO_REPLY_MARK = 0

# Derived-stream tags for non-agent draws. Agent streams use the agent id
# itself, so tags must sit far outside any valid id range.
FAULT_STREAM_TAG = 0x6661756C74       # "fault"
STRATEGY_STREAM_TAG = 0x73747261      # "stra"


class ConfigError(ValueError):
    """Raised for structurally invalid protocol or experiment configuration."""


@dataclass(frozen=True, slots=True)
class Params:
    """Protocol parameters shared by every agent.

    ``modulus`` is n**3 and ``phase_rounds`` is max(1, ceil(gamma * ln n)):
    each networked phase runs for ``phase_rounds`` rounds, so a full run
    takes 4 * phase_rounds rounds on the wire.
    """

    n: int
    gamma: float
    chi: float
    num_colors: int
    modulus: int
    phase_rounds: int


def derive_params(n: int, gamma: float, chi: float = 1.0,
                  num_colors: int = 2) -> Params:
    """Validate the base inputs and fix the derived constants."""
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma!r}")
    if chi < 0:
        raise ConfigError(f"chi must be non-negative, got {chi!r}")
    if not isinstance(num_colors, int) or num_colors < 1:
        raise ConfigError(f"num_colors must be a positive integer, got {num_colors!r}")
    rounds = max(1, math.ceil(gamma * math.log(n)))
    return Params(n=n, gamma=float(gamma), chi=float(chi),
                  num_colors=num_colors, modulus=n ** 3, phase_rounds=rounds)


def derive_stream(master_seed: int, label: int) -> np.random.Generator:
    """Deterministic, independent random stream for (master seed, label).

    Agents use their own id as label; auxiliary draws (fault sampling,
    strategy randomness) use the fixed tags above. Per-phase draws are taken
    from an agent's stream in fixed-size blocks in phase order, so every
    draw is a pure function of (seed, label, phase, position) and is
    unaffected by what any other agent does.
    """
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((master_seed, label))))


def draw_vote_intention(params: Params,
                        rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    """Draw the q (value, target) vote pairs one agent intends to cast.

    Values are uniform over [1, modulus] (residue 0 keeps its meaning as the
    no-reply mark; the representative ``modulus`` stands for residue zero),
    targets uniform over [1, n], self included.
    """
    q = params.phase_rounds
    values = rng.integers(1, params.modulus + 1, size=q).tolist()
    targets = rng.integers(1, params.n + 1, size=q).tolist()
    return tuple(zip(values, targets))


def draw_contact_targets(params: Params, rng: np.random.Generator) -> list[int]:
    """Draw one uniform contact target per round for a networked phase."""
    return rng.integers(1, params.n + 1, size=params.phase_rounds).tolist()


def valid_intention(decl: object, params: Params) -> bool:
    """Shape check for a declared vote list: q in-range (value, target) pairs."""
    if not isinstance(decl, (tuple, list)) or len(decl) != params.phase_rounds:
        return False
    m, n = params.modulus, params.n
    for pair in decl:
        if not isinstance(pair, (tuple, list)) or len(pair) != 2:
            return False
        value, target = pair
        if not isinstance(value, int) or not 0 <= value <= m:
            return False
        if not isinstance(target, int) or not 1 <= target <= n:
            return False
    return True


class Ledger:
    """One agent's record of everybody who answered (or ignored) its pulls.

    ``declarations`` maps voter id -> tuple of q (value, target) pairs, or
    None for a voter that failed to answer; a None entry stands for "all q
    votes of this voter are 0". Re-recording a voter overwrites: an honest
    voter always declares the same list, so for it the operation is
    idempotent.
    """

    __slots__ = ("declarations",)

    def __init__(self) -> None:
        self.declarations: dict[int, Optional[tuple]] = {}

    def knows(self, voter: AgentId) -> bool:
        return voter in self.declarations

    def is_marked(self, voter: AgentId) -> bool:
        return self.declarations.get(voter, _UNSEEN) is None

    @property
    def faulty_marks(self) -> frozenset[AgentId]:
        return frozenset(v for v, d in self.declarations.items() if d is None)

    def entry(self, voter: AgentId, round_index: int) -> Optional[tuple[int, int]]:
        """Declared (value, target) of ``voter`` for the given round, if known.

        Returns (0, None)-style mark semantics as (0, 0) for marked voters
        and None when the voter was never pulled.
        """
        decl = self.declarations.get(voter, _UNSEEN)
        if decl is _UNSEEN:
            return None
        if decl is None:
            return (NO_REPLY_MARK, 0)
        return decl[round_index - 1]


_UNSEEN = object()


def record_commitment(ledger: Ledger, voter: AgentId, reply: object,
                      params: Params) -> None:
    """File a pull answer: a declared vote list, or a no-reply mark.

    A missing or malformed reply is indistinguishable from silence to the
    puller, so both record the mark.
    """
    if reply is not None and valid_intention(reply, params):
        ledger.declarations[voter] = tuple((int(v), int(t)) for v, t in reply)
    else:
        ledger.declarations[voter] = None


def vote_sum(votes: Iterable[Sequence[int]], modulus: int) -> int:
    """Sum of vote values mod modulus. An empty tally sums to 0."""
    return sum(v[0] for v in votes) % modulus


@dataclass(frozen=True, slots=True)
class Certificate:
    """A claim "agent ``owner`` with proposal ``color`` drew ``ticket``".

    ``votes`` is the claimed tally backing the ticket: (value, sender,
    round_index) triples sorted by (sender, round_index). The agent holding
    the smallest ticket after find-min wins, so certificates are compared by
    ticket and otherwise treated as opaque, equal-or-not blobs.
    """

    ticket: int
    votes: tuple[tuple[int, int, int], ...]
    color: Color
    owner: AgentId

    def canonical(self) -> tuple:
        """Stable positional form used for serialization and hashing."""
        return (self.ticket, self.votes, self.color, self.owner)


def _vote_order(entry: Sequence[int]) -> tuple[int, int]:
    return (entry[1], entry[2])


def make_certificate(tally: Iterable[Sequence[int]], color: Color,
                     owner: AgentId, modulus: int) -> Certificate:
    """Build an honest certificate from a received-vote tally."""
    votes = tuple(sorted((tuple(v) for v in tally), key=_vote_order))
    return Certificate(vote_sum(votes, modulus), votes, color, owner)


def certificate_flaw(cert: object, params: Params) -> Optional[str]:
    """Why ``cert`` does not fit the wire format, or None if it does.

    Beyond field ranges this rejects duplicate (sender, round) vote slots:
    at most one vote can be pushed per sender per round, so a list reusing a
    slot claims something no execution could produce.
    """
    if not isinstance(cert, Certificate):
        return "not a certificate"
    if not isinstance(cert.ticket, int) or not 0 <= cert.ticket < params.modulus:
        return "ticket out of range"
    if not isinstance(cert.color, int) or not 1 <= cert.color <= params.num_colors:
        return "color out of range"
    if not isinstance(cert.owner, int) or not 1 <= cert.owner <= params.n:
        return "owner out of range"
    if not isinstance(cert.votes, tuple):
        return "votes not a tuple"
    seen = set()
    for entry in cert.votes:
        if not isinstance(entry, tuple) or len(entry) != 3:
            return "malformed vote entry"
        value, sender, rnd = entry
        if not isinstance(value, int) or not 0 <= value <= params.modulus:
            return "vote value out of range"
        if not isinstance(sender, int) or not 1 <= sender <= params.n:
            return "vote sender out of range"
        if not isinstance(rnd, int) or not 1 <= rnd <= params.phase_rounds:
            return "vote round out of range"
        slot = (sender, rnd)
        if slot in seen:
            return "duplicate (sender, round) vote"
        seen.add(slot)
    return None


def min_certificate(incumbent: Certificate, candidate: Certificate) -> Certificate:
    """Keep the certificate with the strictly smaller ticket; ties keep the
    incumbent."""
    return candidate if candidate.ticket < incumbent.ticket else incumbent


class VerifyResult(NamedTuple):
    accepted: bool
    color: Optional[Color]
    reason: Optional[str]


BAD_CHECKSUM = "bad_checksum"
VOTE_MISMATCH = "vote_mismatch"
MARKED_VOTER_NONZERO = "marked_voter_nonzero"
CERT_CONFLICT = "certificate_conflict"


def verify_certificate(cert: Certificate, ledger: Ledger,
                       params: Params) -> VerifyResult:
    """Audit a winning certificate against one agent's own ledger.

    Accepts iff (i) the ticket equals the claimed votes' sum mod modulus and
    (ii) every claimed vote whose sender this agent pulled matches what that
    sender declared: the declared target must be the certificate owner and
    the declared value must equal the claimed value; a vote attributed to a
    marked (silent) voter must be 0. Votes from senders this agent never
    pulled cannot be cross-checked and pass by default.
    """
    if cert.ticket != vote_sum(cert.votes, params.modulus):
        return VerifyResult(False, None, BAD_CHECKSUM)
    declarations = ledger.declarations
    owner = cert.owner
    for value, sender, rnd in cert.votes:
        decl = declarations.get(sender, _UNSEEN)
        if decl is _UNSEEN:
            continue
        if decl is None:
            if value != NO_REPLY_MARK:
                return VerifyResult(False, None, MARKED_VOTER_NONZERO)
            continue
        declared_value, declared_target = decl[rnd - 1]
        if declared_target != owner or declared_value != value:
            return VerifyResult(False, None, VOTE_MISMATCH)
    return VerifyResult(True, cert.color, None)


def payoff(outcome: Optional[Color], supported: Color, chi: float) -> float:
    """Utility of an agent supporting ``supported``: 1 if its color won,
    -chi if the protocol failed (outcome None), 0 if another color won."""
    if outcome is None:
        return -chi
    return 1.0 if outcome == supported else 0.0
