"""Packing layout, capacity limits, and commit/reveal binding."""

import random

import pytest

from peerchain.commitment import (
    KEY_BITS,
    LAYOUT_BYTES,
    MAX_ANSWERS,
    MESSAGE_BITS,
    Commitment,
    PackedAnswerVector,
    SecretKey,
    commit,
    decode,
    layout_bytes,
    pack,
    verify_reveal,
)
from peerchain.errors import DuplicateAnswer, TooManyAnswers, UnknownQuestion
from peerchain.keccak import keccak256


def test_capacity_constants_follow_from_digest_size():
    assert MESSAGE_BITS == 256 // 3 == 85
    assert KEY_BITS == 85
    assert MAX_ANSWERS == 85 // 2 == 42
    assert LAYOUT_BYTES == 22


def test_pack_small_example_layout():
    vec = pack([("qa", 1)], ["qa", "qb"])
    assert vec.slots == ((1, 1), (0, 0))
    assert vec.message() == 0b11
    raw = layout_bytes(vec, SecretKey(1))
    # key bit 0 -> byte 0; message bits 85,86 -> byte 10 bits 5,6
    expected = bytes([1] + [0] * 9 + [0x60] + [0] * 11)
    assert raw == expected
    assert commit(vec, SecretKey(1)).digest == keccak256(expected)


def test_pack_rejects_43rd_answer():
    order = [f"q{i}" for i in range(43)]
    with pytest.raises(TooManyAnswers):
        pack([(q, 1) for q in order], order)
    with pytest.raises(TooManyAnswers):
        pack([], order)
    pack([(q, 0) for q in order[:42]], order[:42])  # 42 is fine


def test_pack_input_validation():
    with pytest.raises(UnknownQuestion):
        pack([("zz", 1)], ["qa"])
    with pytest.raises(DuplicateAnswer):
        pack([("qa", 1), ("qa", 0)], ["qa", "qb"])
    with pytest.raises(ValueError):
        pack([("qa", 2)], ["qa"])


def test_vector_validation():
    with pytest.raises(ValueError):
        PackedAnswerVector(((0, 1),), ("qa",))  # unanswered slot with answer bit
    with pytest.raises(ValueError):
        PackedAnswerVector(((1, 1),), ("qa", "qb"))  # slot/order mismatch


def test_decode_rejects_malformed_messages():
    with pytest.raises(ValueError):
        decode(1 << MESSAGE_BITS, ["qa"])
    with pytest.raises(ValueError):
        decode(0b10, ["qa"])  # answer bit set on an unanswered slot


def test_roundtrip_random_vectors():
    rng = random.Random(2024)
    for _ in range(1000):
        n = rng.randint(1, MAX_ANSWERS)
        order = [f"q{i}" for i in range(n)]
        answered = [q for q in order if rng.random() < 0.8]
        answers = [(q, rng.randint(0, 1)) for q in answered]
        vec = pack(answers, order)
        back = decode(vec.message(), order)
        assert back == vec
        assert back.answers() == dict(answers)


def test_key_range_checked():
    SecretKey((1 << KEY_BITS) - 1)
    with pytest.raises(ValueError):
        SecretKey(1 << KEY_BITS)
    with pytest.raises(ValueError):
        SecretKey(-1)


def test_commit_verify_and_tampering():
    rng = random.Random(7)
    order = [f"q{i}" for i in range(10)]
    vec = pack([(q, rng.randint(0, 1)) for q in order], order)
    key = SecretKey.from_rng(rng)
    c = commit(vec, key)
    assert verify_reveal(c, vec, key)
    # any single-bit flip of the key is rejected
    for bit in range(KEY_BITS):
        assert not verify_reveal(c, vec, SecretKey(key.value ^ (1 << bit)))
    # any single answer-bit flip is rejected
    for j in range(len(order)):
        slots = list(vec.slots)
        slots[j] = (1, 1 - slots[j][1])
        assert not verify_reveal(c, PackedAnswerVector(tuple(slots), vec.question_order), key)


def test_commitment_hex_roundtrip():
    c = commit(pack([("qa", 1)], ["qa"]), SecretKey(5))
    assert Commitment.from_hex(c.hex()) == c
    with pytest.raises(ValueError):
        Commitment(b"\x00" * 31)
