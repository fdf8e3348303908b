"""Reward mechanisms against hand-computed and brute-force oracles."""

import random
from collections import Counter
from fractions import Fraction as F

import pytest

from peerchain.errors import EmptyMatrix, NoNonCommonQuestions
from peerchain.mechanisms import (
    ALL_PEERS,
    AnswerMatrix,
    FrequencyTable,
    Mechanism,
    SampledPeers,
    compute_rewards,
    peers_for_cell,
    rewards_naive,
)

from conftest import random_matrix, skip_one_matrix

# three agents, two questions; worked through by hand in the module docs
M1 = AnswerMatrix(("A", "B", "C"), ("q1", "q2"), {
    ("A", "q1"): 1, ("A", "q2"): 0,
    ("B", "q1"): 1, ("B", "q2"): 1,
    ("C", "q1"): 0, ("C", "q2"): 1,
})


def test_matrix_validation():
    # empty matrices are legal (a round where nobody revealed), but
    # reward computation refuses them
    empty = AnswerMatrix(("A",), ("q1",), {})
    with pytest.raises(EmptyMatrix):
        compute_rewards(empty, Mechanism.OA)
    with pytest.raises(ValueError):
        AnswerMatrix(("A",), ("q1",), {("Z", "q1"): 1})
    with pytest.raises(ValueError):
        AnswerMatrix(("A",), ("q1",), {("A", "zz"): 1})
    with pytest.raises(ValueError):
        AnswerMatrix(("A",), ("q1",), {("A", "q1"): 2})
    with pytest.raises(ValueError):
        AnswerMatrix(("A", "A"), ("q1",), {("A", "q1"): 1})


def test_matrix_views():
    assert M1.total_answers == 6
    assert M1.question_counts("q1") == (1, 2)
    assert M1.answers_by_agent["A"] == {"q1": 1, "q2": 0}
    assert M1.answerers_by_question["q2"] == ["A", "B", "C"]


def test_frequency_table_excludes_own_answers():
    table = FrequencyTable.from_matrix(M1)
    assert table.global_counts == (2, 4)
    assert table.excluding("A") == (1, 3)  # A contributed one 0 and one 1
    assert table.relative_frequency("A", 1) == F(3, 4)
    assert table.relative_frequency("B", 0) == F(1, 2)
    # zero count for the answer value -> frequency 0 by convention
    lone = FrequencyTable.from_matrix(
        AnswerMatrix(("A", "B"), ("q1",), {("A", "q1"): 1, ("B", "q1"): 1})
    )
    assert lone.relative_frequency("A", 0) == F(0)


def test_oa_hand_oracle():
    rewards = compute_rewards(M1, Mechanism.OA).per_agent_reward
    assert rewards == {"A": F(1, 4), "B": F(1, 2), "C": F(1, 4)}


def test_oa_perfect_consensus_is_one():
    m = AnswerMatrix(("A", "B"), ("q1",), {("A", "q1"): 1, ("B", "q1"): 1})
    assert compute_rewards(m, Mechanism.OA).per_agent_reward == {"A": F(1), "B": F(1)}


def test_dg_hand_oracles():
    # disjoint-exclusive pair with zero blind agreement
    m2 = AnswerMatrix(("A", "B"), ("q1", "q2", "q3", "q4"), {
        ("A", "q1"): 1, ("A", "q2"): 0, ("A", "q3"): 1,
        ("B", "q2"): 1, ("B", "q3"): 1, ("B", "q4"): 0,
    })
    assert compute_rewards(m2, Mechanism.DG).per_agent_reward == {"A": F(1, 2), "B": F(1, 2)}
    # full blind agreement: penalty 1 on every used pair
    m3 = AnswerMatrix(("A", "B"), ("q1", "q2", "q3", "q4"), {
        ("A", "q1"): 1, ("A", "q2"): 1, ("A", "q3"): 0,
        ("B", "q2"): 0, ("B", "q3"): 0, ("B", "q4"): 1,
    })
    assert compute_rewards(m3, Mechanism.DG).per_agent_reward == {"A": F(-1, 2), "B": F(-1, 2)}


def test_dg_requires_exclusive_questions():
    m = AnswerMatrix(("A", "B"), ("q1", "q2"), {
        ("A", "q1"): 1, ("A", "q2"): 0, ("B", "q1"): 1, ("B", "q2"): 0,
    })
    with pytest.raises(NoNonCommonQuestions):
        compute_rewards(m, Mechanism.DG)
    with pytest.raises(NoNonCommonQuestions):
        rewards_naive(m, Mechanism.DG)


def test_ptsc_hand_oracle():
    rewards = compute_rewards(M1, Mechanism.PTSC, alpha=F(1)).per_agent_reward
    assert rewards == {"A": F(-2, 3), "B": F(0), "C": F(-2, 3)}
    # alpha scales linearly
    doubled = compute_rewards(M1, Mechanism.PTSC, alpha=F(2)).per_agent_reward
    assert doubled == {a: 2 * r for a, r in rewards.items()}


def test_ptsc_zero_frequency_rule():
    # D's answer 0 is unique: R_D(0) = 0, so D's term is 0, not -alpha
    m4 = AnswerMatrix(("A", "B", "D"), ("q1", "q2"), {
        ("A", "q1"): 1, ("A", "q2"): 1,
        ("B", "q1"): 1, ("B", "q2"): 1,
        ("D", "q1"): 0,
    })
    rewards = compute_rewards(m4, Mechanism.PTSC, alpha=F(1)).per_agent_reward
    assert rewards == {"A": F(1, 8), "B": F(1, 8), "D": F(0)}


def test_reward_bounds_hold_on_random_matrices():
    rng = random.Random(5)
    for _ in range(50):
        m = random_matrix(rng, rng.randint(2, 6), rng.randint(2, 6))
        oa = compute_rewards(m, Mechanism.OA)
        assert all(0 <= r <= 1 for r in oa.per_agent_reward.values())
        alpha = F(rng.randint(1, 4), 2)
        pt = compute_rewards(m, Mechanism.PTSC, alpha=alpha)
        assert all(r >= -alpha for r in pt.per_agent_reward.values())
    rng = random.Random(6)
    for _ in range(30):
        m = skip_one_matrix(rng, rng.randint(3, 6))
        dg = compute_rewards(m, Mechanism.DG)
        assert all(-1 <= r <= 1 for r in dg.per_agent_reward.values())


def _brute_force(matrix: AnswerMatrix, mechanism: Mechanism, alpha=F(1)):
    """Deliberately different third implementation: plain nested loops."""
    out = {}
    for agent in matrix.agents:
        terms = []
        for q in matrix.questions:
            y = matrix.cells.get((agent, q))
            if y is None:
                continue
            peers = [p for p in matrix.agents
                     if p != agent and (p, q) in matrix.cells]
            if not peers:
                continue
            if mechanism is Mechanism.OA:
                scores = [F(1) if matrix.cells[(p, q)] == y else F(0) for p in peers]
            elif mechanism is Mechanism.DG:
                scores = []
                for p in peers:
                    mine = {qq for (aa, qq) in matrix.cells if aa == agent}
                    theirs = {qq for (aa, qq) in matrix.cells if aa == p}
                    ex_m = sorted(mine - theirs)
                    ex_t = sorted(theirs - mine)
                    if not ex_m or not ex_t:
                        raise NoNonCommonQuestions(agent, p)
                    agree = sum(
                        1
                        for qa in ex_m for qb in ex_t
                        if matrix.cells[(agent, qa)] == matrix.cells[(p, qb)]
                    )
                    penalty = F(agree, len(ex_m) * len(ex_t))
                    scores.append((F(1) if matrix.cells[(p, q)] == y else F(0)) - penalty)
            else:
                counts = Counter(bit for (aa, _), bit in matrix.cells.items() if aa != agent)
                total = counts[0] + counts[1]
                freq = F(counts[y], total) if total else F(0)
                if freq == 0:
                    scores = [F(0)]
                else:
                    match = F(sum(1 for p in peers if matrix.cells[(p, q)] == y), len(peers))
                    scores = [alpha * (match / freq - 1)]
                terms.append(sum(scores, F(0)) / len(scores))
                continue
            terms.append(sum(scores, F(0)) / len(peers))
        out[agent] = sum(terms, F(0)) / len(terms) if terms else F(0)
    return out


def test_brute_force_oracle_agreement():
    rng = random.Random(77)
    checked = 0
    for _ in range(60):
        m = random_matrix(rng, rng.randint(2, 5), rng.randint(2, 5))
        for mech in (Mechanism.OA, Mechanism.PTSC):
            expected = _brute_force(m, mech, alpha=F(3, 2))
            got = compute_rewards(m, mech, alpha=F(3, 2)).per_agent_reward
            assert got == expected, (mech, m.cells)
            checked += 1
    for _ in range(40):
        m = skip_one_matrix(rng, rng.randint(3, 5))
        expected = _brute_force(m, Mechanism.DG)
        got = compute_rewards(m, Mechanism.DG).per_agent_reward
        assert got == expected, m.cells
        checked += 1
    assert checked == 160


def test_relabeling_invariance():
    rng = random.Random(13)
    m = skip_one_matrix(rng, 5)
    a_map = {a: f"agent-{a}" for a in m.agents}
    q_map = {q: f"question-{q}" for q in m.questions}
    relabeled = m.relabeled(a_map, q_map)
    for mech in Mechanism:
        base = compute_rewards(m, mech, alpha=F(1), peer_mode=SampledPeers(2, 9))
        moved = compute_rewards(relabeled, mech, alpha=F(1), peer_mode=SampledPeers(2, 9))
        assert moved.per_agent_reward == {
            a_map[a]: r for a, r in base.per_agent_reward.items()
        }


def test_sampled_peers_subset_and_determinism():
    rng = random.Random(21)
    m = random_matrix(rng, 6, 6, p_answer=0.9)
    mode = SampledPeers(2, 4242)
    for a in m.agents:
        for q, _y in m.answers_by_agent[a].items():
            peers = peers_for_cell(m, a, q, mode)
            candidates = [p for p in m.answerers_by_question[q] if p != a]
            assert len(peers) == min(2, len(candidates))
            assert set(peers) <= set(candidates)
            assert peers == peers_for_cell(m, a, q, mode)
    full = peers_for_cell(m, m.agents[0], m.questions[0], ALL_PEERS)
    assert full == [p for p in m.answerers_by_question[m.questions[0]] if p != m.agents[0]]


def test_sampled_rewards_match_manual_recomputation():
    rng = random.Random(31)
    m = random_matrix(rng, 5, 5, p_answer=0.9)
    mode = SampledPeers(1, 77)
    got = compute_rewards(m, Mechanism.OA, peer_mode=mode).per_agent_reward
    for agent in m.agents:
        terms = []
        for q, y in m.answers_by_agent[agent].items():
            peers = peers_for_cell(m, agent, q, mode)
            if not peers:
                continue
            terms.append(F(sum(1 for p in peers if m.cells[(p, q)] == y), len(peers)))
        expected = sum(terms, F(0)) / len(terms) if terms else F(0)
        assert got[agent] == expected


def test_optimized_equals_naive_with_sampling():
    rng = random.Random(8)
    for trial in range(25):
        m = random_matrix(rng, rng.randint(3, 7), rng.randint(3, 7), p_answer=0.8)
        mode = SampledPeers(rng.randint(1, 3), trial)
        for mech in (Mechanism.OA, Mechanism.PTSC):
            a = compute_rewards(m, mech, alpha=F(1), peer_mode=mode).per_agent_reward
            b = rewards_naive(m, mech, alpha=F(1), peer_mode=mode).per_agent_reward
            assert a == b


def test_desk_regression_pins(desk_truth):
    oa = compute_rewards(desk_truth, Mechanism.OA).per_agent_reward
    assert float(oa["a000"]) == 0.8002675597757645
    assert float(sum(oa.values(), F(0))) == 41.7060141280139
    pt = compute_rewards(desk_truth, Mechanism.PTSC, alpha=F(1, 2))
    assert all(r >= -F(1, 2) for r in pt.per_agent_reward.values())


def test_report_metadata():
    report = compute_rewards(M1, Mechanism.PTSC, alpha=F(1, 2))
    assert report.mechanism is Mechanism.PTSC
    assert report.scaling == F(1, 2)
    report.validate_bounds()
