#!/usr/bin/env python3
"""
Non-interactive sigma protocols for conjunctions of multi-base discrete-log
representation statements, made non-interactive with Fiat-Shamir.

A Statement is a list of equations ``T = prod(base_j ** w[idx_j])``; the
equations may mix G1 and G2 and share witnesses. One challenge covers the
whole conjunction and there is one response per witness.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import groups
from .errors import DeserializationError, ProofError
from .groups import GroupId, PublicParams, Rng, Scalar

logger = logging.getLogger(__name__)

PROTOCOL_TAG = b"privsso/nizk/v1"

_GROUP_CODES = {GroupId.G1: 1, GroupId.G2: 2}


@dataclass(frozen=True)
class Equation:
    target: object
    terms: Tuple[Tuple[object, int], ...]

    @property
    def group(self) -> GroupId:
        return groups.group_of(self.target)

    def evaluate(self, witnesses: Sequence[Scalar]):
        bases = [base for base, _ in self.terms]
        return groups.multi_exp(bases, [witnesses[i] for _, i in self.terms], self.group)

    def to_bytes(self) -> bytes:
        out = bytearray([_GROUP_CODES[self.group]])
        out += groups.serialize(self.target)
        out += len(self.terms).to_bytes(2, "big")
        for base, index in self.terms:
            out += groups.serialize(base)
            out += index.to_bytes(2, "big")
        return bytes(out)


@dataclass(frozen=True)
class Statement:
    equations: Tuple[Equation, ...]
    witness_count: int
    context: bytes = b""

    def __post_init__(self):
        referenced = set()
        for eq in self.equations:
            if eq.group not in _GROUP_CODES:
                raise ProofError("equations must live in G1 or G2")
            for base, index in eq.terms:
                if groups.group_of(base) != eq.group:
                    raise ProofError("base and target of an equation must share a group")
                if not 0 <= index < self.witness_count:
                    raise ProofError(f"witness index {index} out of range")
                referenced.add(index)
        if referenced != set(range(self.witness_count)):
            raise ProofError("every witness must appear in at least one equation")

    def with_context(self, context: bytes) -> "Statement":
        return Statement(self.equations, self.witness_count, context)

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += len(self.equations).to_bytes(2, "big")
        for eq in self.equations:
            encoded = eq.to_bytes()
            out += len(encoded).to_bytes(4, "big") + encoded
        out += self.witness_count.to_bytes(2, "big")
        out += len(self.context).to_bytes(4, "big") + self.context
        return bytes(out)

    def is_satisfied_by(self, witnesses: Sequence[Scalar]) -> bool:
        return all(eq.evaluate(witnesses) == eq.target for eq in self.equations)


@dataclass(frozen=True)
class SigmaProof:
    challenge: Scalar
    responses: Tuple[Scalar, ...]

    def to_bytes(self) -> bytes:
        return self.challenge.to_bytes() + b"".join(r.to_bytes() for r in self.responses)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SigmaProof":
        size = groups.SCALAR_BYTES
        if len(data) < size or len(data) % size:
            raise DeserializationError("sigma proof length is not a multiple of the scalar size")
        chunks = [Scalar.from_bytes(data[i:i + size]) for i in range(0, len(data), size)]
        return cls(chunks[0], tuple(chunks[1:]))


class Transcript:
    """Append-only Fiat-Shamir transcript"""

    def __init__(self, tag: bytes = PROTOCOL_TAG):
        self._hash = hashlib.sha512()
        self.append(b"tag", tag)

    def append(self, label: bytes, data: bytes) -> "Transcript":
        self._hash.update(len(label).to_bytes(2, "big") + label)
        self._hash.update(len(data).to_bytes(4, "big") + data)
        return self

    def digest(self) -> bytes:
        return self._hash.copy().digest()


def derive_challenge(transcript: Transcript) -> Scalar:
    """Reduce the 512-bit transcript digest modulo the group order"""
    return Scalar(int.from_bytes(transcript.digest(), "big") % groups.ORDER)


def _transcript(params: PublicParams, statement: Statement, commitments: Sequence) -> Transcript:
    transcript = Transcript()
    transcript.append(b"params", params.to_bytes())
    transcript.append(b"statement", statement.to_bytes())
    for commitment in commitments:
        transcript.append(b"commitment", groups.serialize(commitment))
    transcript.append(b"context", statement.context)
    return transcript


def prove(statement: Statement, witnesses: Sequence[Scalar], rng: Optional[Rng] = None,
          params: Optional[PublicParams] = None) -> SigmaProof:
    """Prove knowledge of `witnesses` satisfying every equation of `statement`"""
    if len(witnesses) != statement.witness_count:
        raise ProofError(f"expected {statement.witness_count} witnesses, got {len(witnesses)}")
    if not statement.is_satisfied_by(witnesses):
        raise ProofError("witnesses do not satisfy the statement")
    params = params or groups.setup()

    nonces = [Scalar.random(rng) for _ in witnesses]
    commitments = [eq.evaluate(nonces) for eq in statement.equations]
    challenge = derive_challenge(_transcript(params, statement, commitments))
    responses = tuple(k - challenge * w for k, w in zip(nonces, witnesses))
    return SigmaProof(challenge, responses)


def verify(statement: Statement, proof: SigmaProof, params: Optional[PublicParams] = None) -> bool:
    try:
        if len(proof.responses) != statement.witness_count:
            return False
        params = params or groups.setup()
        commitments = [
            eq.target ** proof.challenge.bn * eq.evaluate(proof.responses)
            for eq in statement.equations
        ]
        return derive_challenge(_transcript(params, statement, commitments)) == proof.challenge
    except Exception as exc:
        logger.debug("🔍 sigma proof rejected on malformed input: %s", exc)
        return False


@dataclass(frozen=True)
class LabeledEquation:
    """Equation whose witnesses are named instead of indexed; used to pass statement fragments between layers"""

    target: object
    terms: Tuple[Tuple[object, str], ...]


class StatementBuilder:
    """Allocates witness indices by label in first-use order"""

    def __init__(self, context: bytes = b""):
        self.context = context
        self._indices: Dict[str, int] = {}
        self._equations: List[Equation] = []

    def witness(self, label: str) -> int:
        if label not in self._indices:
            self._indices[label] = len(self._indices)
        return self._indices[label]

    def add(self, target, terms: Sequence[Tuple[object, str]]) -> "StatementBuilder":
        self._equations.append(
            Equation(target, tuple((base, self.witness(label)) for base, label in terms))
        )
        return self

    def extend(self, fragment: Sequence[LabeledEquation]) -> "StatementBuilder":
        for eq in fragment:
            self.add(eq.target, eq.terms)
        return self

    @property
    def labels(self) -> List[str]:
        return sorted(self._indices, key=self._indices.get)

    def build(self) -> Statement:
        return Statement(tuple(self._equations), len(self._indices), self.context)

    def witnesses(self, values: Mapping[str, Scalar]) -> List[Scalar]:
        missing = [label for label in self.labels if label not in values]
        if missing:
            raise ProofError(f"missing witnesses: {', '.join(missing)}")
        return [values[label] for label in self.labels]
