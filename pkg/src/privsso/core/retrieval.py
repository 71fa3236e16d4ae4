#!/usr/bin/env python3
"""
Threshold ElGamal identity-retrieval tokens.

A token E = (g^eps, y^eps * h^gamma) encrypts the IdP lookup key h^gamma
under the authorities' aggregated key y. Keys are Shamir-shared by a
trusted dealer; authorities return partial decryptions with Chaum-Pedersen
proofs and any `threshold` of them recover h^gamma.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import groups, nizk
from .errors import DeserializationError, InvalidPartialError, ThresholdError
from .groups import G1Elem, GroupId, PublicParams, Rng, Scalar
from .nizk import LabeledEquation, SigmaProof, StatementBuilder
from .pscred import GAMMA_INDEX, attr_label

logger = logging.getLogger(__name__)

H_SEED = b"privsso:h"
EPSILON_LABEL = "epsilon"
PARTIAL_CONTEXT = b"privsso/partial-decryption"


@lru_cache(maxsize=1)
def retrieval_base() -> G1Elem:
    """Second G1 generator h with no known discrete log w.r.t. g"""
    return groups.hash_to_g1(H_SEED)


@dataclass(frozen=True)
class AuthorityShare:
    index: int
    secret: Scalar = field(repr=False)


@dataclass(frozen=True)
class AuthorityPublicInfo:
    """What RPs and combiners know about an authority set"""

    n_auth: int
    threshold: int
    y: G1Elem
    h: G1Elem
    commitments: Dict[int, G1Elem] = field(hash=False)

    def to_dict(self) -> dict:
        return {
            "n_auth": self.n_auth,
            "threshold": self.threshold,
            "y": groups.serialize(self.y).hex(),
            "h": groups.serialize(self.h).hex(),
            "commitments": {str(i): groups.serialize(c).hex() for i, c in sorted(self.commitments.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AuthorityPublicInfo":
        try:
            return cls(
                n_auth=int(data["n_auth"]),
                threshold=int(data["threshold"]),
                y=groups.deserialize(bytes.fromhex(data["y"]), GroupId.G1),
                h=groups.deserialize(bytes.fromhex(data["h"]), GroupId.G1),
                commitments={
                    int(i): groups.deserialize(bytes.fromhex(c), GroupId.G1)
                    for i, c in data["commitments"].items()
                },
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DeserializationError(f"invalid authority descriptor: {exc}") from exc


@dataclass(frozen=True)
class AuthorityKeySet:
    n_auth: int
    threshold: int
    shares: Tuple[AuthorityShare, ...] = field(repr=False)
    y: G1Elem
    h: G1Elem
    commitments: Dict[int, G1Elem] = field(hash=False)

    @property
    def public(self) -> AuthorityPublicInfo:
        return AuthorityPublicInfo(self.n_auth, self.threshold, self.y, self.h, dict(self.commitments))

    def share(self, index: int) -> AuthorityShare:
        for share in self.shares:
            if share.index == index:
                return share
        raise ThresholdError(f"no share for authority {index}")


@dataclass(frozen=True)
class RetrievalToken:
    c1: G1Elem
    c2: G1Elem

    def to_bytes(self) -> bytes:
        return groups.serialize(self.c1) + groups.serialize(self.c2)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RetrievalToken":
        size = groups.element_length(GroupId.G1)
        if len(data) != 2 * size:
            raise DeserializationError("retrieval token must hold two G1 elements")
        return cls(groups.deserialize(data[:size], GroupId.G1), groups.deserialize(data[size:], GroupId.G1))


@dataclass(frozen=True)
class PartialDecryption:
    index: int
    share: G1Elem
    proof: Optional[SigmaProof] = None

    def to_bytes(self) -> bytes:
        proof = self.proof.to_bytes() if self.proof else b""
        return self.index.to_bytes(2, "big") + groups.serialize(self.share) + proof

    @classmethod
    def from_bytes(cls, data: bytes) -> "PartialDecryption":
        size = groups.element_length(GroupId.G1)
        if len(data) < 2 + size:
            raise DeserializationError("truncated partial decryption")
        rest = data[2 + size:]
        return cls(
            index=int.from_bytes(data[:2], "big"),
            share=groups.deserialize(data[2:2 + size], GroupId.G1),
            proof=SigmaProof.from_bytes(rest) if rest else None,
        )


def authority_keygen(params: PublicParams, n_auth: int, threshold: int,
                     rng: Optional[Rng] = None) -> AuthorityKeySet:
    """Trusted-dealer Shamir sharing of the master decryption key"""
    if not 1 <= threshold <= n_auth:
        raise ThresholdError(f"invalid threshold {threshold} for {n_auth} authorities")
    coefficients = [Scalar.random_nonzero(rng)] + [Scalar.random(rng) for _ in range(threshold - 1)]

    def poly(x: int) -> Scalar:
        acc = Scalar(0)
        for coefficient in reversed(coefficients):
            acc = acc * x + coefficient
        return acc

    # index 0 is the master secret and is never handed out
    shares = tuple(AuthorityShare(i, poly(i)) for i in range(1, n_auth + 1))
    y = groups.exp(params.g, coefficients[0])
    commitments = {s.index: groups.exp(params.g, s.secret) for s in shares}
    logger.info("🔑 dealt %d-of-%d authority key shares", threshold, n_auth)
    return AuthorityKeySet(n_auth, threshold, shares, y, retrieval_base(), commitments)


def encrypt(params: PublicParams, y: G1Elem, h: G1Elem, gamma: Scalar, rng: Optional[Rng] = None,
            epsilon: Optional[Scalar] = None) -> Tuple[Scalar, RetrievalToken]:
    eps = Scalar.random(rng) if epsilon is None else epsilon
    return eps, RetrievalToken(groups.exp(params.g, eps), groups.exp(y, eps) * groups.exp(h, gamma))


def _partial_statement(params: PublicParams, token: RetrievalToken, index: int,
                       share_value: G1Elem, commitment: G1Elem) -> nizk.Statement:
    builder = StatementBuilder(PARTIAL_CONTEXT + index.to_bytes(2, "big") + token.to_bytes())
    builder.add(share_value, [(token.c1, "share")])
    builder.add(commitment, [(params.g, "share")])
    return builder.build()


def partial_decrypt(params: PublicParams, share: AuthorityShare, token: RetrievalToken,
                    rng: Optional[Rng] = None) -> PartialDecryption:
    value = groups.exp(token.c1, share.secret)
    commitment = groups.exp(params.g, share.secret)
    statement = _partial_statement(params, token, share.index, value, commitment)
    return PartialDecryption(share.index, value, nizk.prove(statement, [share.secret], rng))


def verify_partial(params: PublicParams, info: AuthorityPublicInfo, token: RetrievalToken,
                   partial: PartialDecryption) -> bool:
    commitment = info.commitments.get(partial.index)
    if commitment is None or partial.proof is None:
        return False
    statement = _partial_statement(params, token, partial.index, partial.share, commitment)
    return nizk.verify(statement, partial.proof)


def lagrange_at_zero(indices: Sequence[int]) -> Dict[int, Scalar]:
    coefficients = {}
    for i in indices:
        num, den = Scalar(1), Scalar(1)
        for j in indices:
            if j != i:
                num = num * j
                den = den * (j - i)
        coefficients[i] = num * den.inverse()
    return coefficients


def combine(params: PublicParams, partials: Iterable[PartialDecryption], token: RetrievalToken,
            info: AuthorityPublicInfo) -> G1Elem:
    """Recover h^gamma from at least `threshold` verified partial decryptions"""
    partials = list(partials)
    indices = [p.index for p in partials]
    if len(set(indices)) != len(indices):
        raise ThresholdError("duplicate authority indices among partial decryptions")
    for partial in partials:
        if not verify_partial(params, info, token, partial):
            raise InvalidPartialError(partial.index)
    if len(partials) < info.threshold:
        raise ThresholdError(f"need {info.threshold} partial decryptions, got {len(partials)}")

    chosen = sorted(partials, key=lambda p: p.index)[:info.threshold]
    lambdas = lagrange_at_zero([p.index for p in chosen])
    mask = groups.multi_exp([p.share for p in chosen], [lambdas[p.index] for p in chosen])
    return token.c2 / mask


def statement_fragment_for_E(params: PublicParams, y: G1Elem, h: G1Elem,
                             token: RetrievalToken) -> List[LabeledEquation]:
    """c1 = g^eps and c2 = y^eps h^gamma, with gamma shared with the credential's attribute"""
    gamma = attr_label(GAMMA_INDEX)
    return [
        LabeledEquation(token.c1, ((params.g, EPSILON_LABEL),)),
        LabeledEquation(token.c2, ((y, EPSILON_LABEL), (h, gamma))),
    ]
