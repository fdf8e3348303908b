"""Answer packing and hash commitments.

A 256-bit Keccak commitment binds a message of at most 85 bits (one third
of the digest size), which at 2 bits per answer holds 42 answers.  The two
bits are: "was the question answered" and "the answer itself".  One
commitment therefore covers a whole batch of an agent's answers; rounds
with more than 42 selected questions use several batches, each under an
independent secret key.

Canonical byte layout (22 bytes, 176 bits, bit i = bit i%8 of byte i//8):

    bits 0..84    secret key S (85 random bits)
    bits 85..169  message m; slot j holds its answered flag at bit 85+2j
                  and the answer bit at 86+2j
    bits 170..175 zero padding

The digest is keccak256 over those 22 bytes.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

from .errors import DuplicateAnswer, TooManyAnswers, UnknownQuestion
from .keccak import keccak256

DIGEST_BITS = 256
MESSAGE_BITS = DIGEST_BITS // 3          # 85
KEY_BITS = MESSAGE_BITS                  # 85
MAX_ANSWERS = MESSAGE_BITS // 2          # 42
LAYOUT_BYTES = 22                        # ceil((85 + 85 + 6 padding) / 8)


@dataclass(frozen=True)
class SecretKey:
    """An 85-bit blinding key, generated off-ledger."""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << KEY_BITS):
            raise ValueError(f"secret key must fit in {KEY_BITS} bits")

    @classmethod
    def generate(cls) -> "SecretKey":
        """Fresh key from the OS entropy source."""
        return cls(secrets.randbits(KEY_BITS))

    @classmethod
    def from_rng(cls, rng) -> "SecretKey":
        """Deterministic key for simulations; ``rng`` needs ``getrandbits``."""
        return cls(rng.getrandbits(KEY_BITS))


@dataclass(frozen=True)
class Commitment:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_BITS // 8:
            raise ValueError("commitment digest must be 32 bytes")

    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, s: str) -> "Commitment":
        return cls(bytes.fromhex(s))


@dataclass(frozen=True)
class PackedAnswerVector:
    """Per-slot (answered, answer) bit pairs over a fixed question order."""

    slots: tuple[tuple[int, int], ...]
    question_order: tuple[str, ...]

    def __post_init__(self):
        if len(self.slots) != len(self.question_order):
            raise ValueError("one slot per question required")
        if len(self.slots) > MAX_ANSWERS:
            raise TooManyAnswers(f"{len(self.slots)} slots exceed the {MAX_ANSWERS}-answer capacity")
        for answered, answer in self.slots:
            if answered not in (0, 1) or answer not in (0, 1):
                raise ValueError("slot bits must be 0 or 1")
            if answered == 0 and answer != 0:
                raise ValueError("unanswered slots must carry answer bit 0")

    def answers(self) -> dict[str, int]:
        """Mapping question id -> answer bit for the answered slots."""
        return {
            q: answer
            for q, (answered, answer) in zip(self.question_order, self.slots)
            if answered
        }

    def message(self) -> int:
        """The packed message m as an integer of at most 85 bits."""
        m = 0
        for j, (answered, answer) in enumerate(self.slots):
            m |= answered << (2 * j)
            m |= answer << (2 * j + 1)
        return m


def pack(answers: list[tuple[str, int]], question_order: list[str] | tuple[str, ...]) -> PackedAnswerVector:
    """Pack (question id, bit) pairs into slots following ``question_order``.

    Questions absent from ``answers`` become (0, 0) slots.  Raises
    TooManyAnswers past the 42-slot capacity and UnknownQuestion for ids
    outside the order.
    """
    order = tuple(question_order)
    if len(answers) > MAX_ANSWERS or len(order) > MAX_ANSWERS:
        raise TooManyAnswers(
            f"at most {MAX_ANSWERS} answers fit in one commitment "
            f"(got {max(len(answers), len(order))})"
        )
    index = {q: j for j, q in enumerate(order)}
    slots = [(0, 0)] * len(order)
    seen = set()
    for q, bit in answers:
        if q not in index:
            raise UnknownQuestion(f"question {q!r} not in the commitment's question order")
        if q in seen:
            raise DuplicateAnswer(f"question {q!r} answered twice")
        if bit not in (0, 1):
            raise ValueError("answers must be 0 or 1")
        seen.add(q)
        slots[index[q]] = (1, bit)
    return PackedAnswerVector(tuple(slots), order)


def decode(message: int, question_order: list[str] | tuple[str, ...]) -> PackedAnswerVector:
    """Inverse of ``PackedAnswerVector.message`` for a known question order."""
    order = tuple(question_order)
    if len(order) > MAX_ANSWERS:
        raise TooManyAnswers(f"question order longer than {MAX_ANSWERS}")
    if not 0 <= message < (1 << MESSAGE_BITS):
        raise ValueError("message outside the 85-bit range")
    slots = []
    for j in range(len(order)):
        answered = (message >> (2 * j)) & 1
        answer = (message >> (2 * j + 1)) & 1
        slots.append((answered, answer))
    return PackedAnswerVector(tuple(slots), order)


def layout_bytes(v: PackedAnswerVector, s: SecretKey) -> bytes:
    """Canonical 22-byte layout hashed by ``commit`` (key low, message high)."""
    return (s.value | (v.message() << KEY_BITS)).to_bytes(LAYOUT_BYTES, "little")


def commit(v: PackedAnswerVector, s: SecretKey) -> Commitment:
    """Keccak-256 commitment over the canonical layout of (S, m)."""
    return Commitment(keccak256(layout_bytes(v, s)))


def verify_reveal(c: Commitment, v: PackedAnswerVector, s: SecretKey) -> bool:
    """True iff the revealed (answers, key) reproduce the commitment."""
    return commit(v, s).digest == c.digest
