"""Dataset handling, behavior mixes, and the end-to-end experiment driver."""

import random
from fractions import Fraction as F

import pytest

from peerchain.errors import EmptyDataset
from peerchain.ledger import Phase
from peerchain.mechanisms import Mechanism, SampledPeers
from peerchain.sim import (
    MISSING,
    AgentPopulation,
    Behavior,
    ExperimentConfig,
    QoSDataset,
    assert_dg_valid,
    binarize,
    commit_reveal_gas,
    generate_reports,
    run_experiment,
    settle_gas,
    sweep_mechanisms,
    sweep_packing,
    sweep_peers,
)


def test_dataset_validation():
    with pytest.raises(EmptyDataset):
        QoSDataset(())
    with pytest.raises(ValueError):
        QoSDataset(((1.0, 2.0), (1.0,)))
    with pytest.raises(ValueError):
        QoSDataset(((-0.5,),))
    ds = QoSDataset(((0.5, MISSING), (MISSING, 2.0)))
    assert ds.n_agents == 2 and ds.n_services == 2


def test_load_accepts_commas_and_whitespace(tmp_path):
    p = tmp_path / "rt.txt"
    p.write_text("0.5, 3.2, -1\n\n1.0 0.25 0.9\n")
    ds = QoSDataset.load(p)
    assert ds.response_times == ((0.5, 3.2, -1.0), (1.0, 0.25, 0.9))
    empty = tmp_path / "empty.txt"
    empty.write_text("\n  \n")
    with pytest.raises(EmptyDataset):
        QoSDataset.load(empty)


def test_binarize_threshold_inclusive():
    ds = QoSDataset(((0.5, 3.2, 1.0, MISSING),))
    m = binarize(ds)
    assert m.cells[("a000", "s0000")] == 1
    assert m.cells[("a000", "s0001")] == 0
    assert m.cells[("a000", "s0002")] == 1  # exactly at the threshold
    assert ("a000", "s0003") not in m.cells
    with pytest.raises(EmptyDataset):
        binarize(QoSDataset(((MISSING, MISSING),)))
    with pytest.raises(ValueError):
        binarize(ds, threshold_seconds=0)


def test_population_counts_and_assignment():
    pop = AgentPopulation()
    assert pop.counts(50) == (25, 13, 12)
    assert pop.counts(4) == (2, 1, 1)
    assert pop.counts(1) == (1, 0, 0)
    assert sum(pop.counts(7)) == 7
    assigned = pop.assign([f"a{i}" for i in range(4)])
    assert assigned == {
        "a0": Behavior.TRUTHFUL,
        "a1": Behavior.TRUTHFUL,
        "a2": Behavior.RANDOM,
        "a3": Behavior.ADVERSARIAL,
    }
    with pytest.raises(ValueError):
        AgentPopulation(F(1, 2), F(1, 2), F(1, 2))
    with pytest.raises(ValueError):
        AgentPopulation(F(3, 2), F(-1, 4), F(-1, 4))


def test_generate_reports_behaviors(desk_truth):
    all_truthful = AgentPopulation(F(1), F(0), F(0))
    assert generate_reports(desk_truth, all_truthful, seed=0).cells == desk_truth.cells

    all_flipped = generate_reports(desk_truth, AgentPopulation(F(0), F(0), F(1)), seed=0)
    assert set(all_flipped.cells) == set(desk_truth.cells)
    assert all(all_flipped.cells[k] == 1 - desk_truth.cells[k] for k in desk_truth.cells)

    mixed = generate_reports(desk_truth, AgentPopulation(), seed=7)
    behaviors = AgentPopulation().assign(desk_truth.agents)
    agree = {b: [] for b in Behavior}
    for (a, q), bit in desk_truth.cells.items():
        agree[behaviors[a]].append(mixed.cells[(a, q)] == bit)
    assert all(agree[Behavior.TRUTHFUL])
    assert not any(agree[Behavior.ADVERSARIAL])
    n = len(agree[Behavior.RANDOM])
    rate = sum(agree[Behavior.RANDOM]) / n
    assert abs(rate - 0.5) < 3 * (0.25 / n) ** 0.5


def test_skip_one_is_dg_valid():
    ds = QoSDataset.skip_one(8, 8, seed=3)
    assert all(ds.response_times[i][i] == MISSING for i in range(8))
    assert_dg_valid(binarize(ds))
    with pytest.raises(ValueError):
        QoSDataset.skip_one(5, 4, seed=0)


def test_assert_dg_valid_catches_subsets():
    bad = QoSDataset(((0.5, 0.5), (0.5, MISSING)))  # row 1 answers a subset
    with pytest.raises(AssertionError):
        assert_dg_valid(binarize(bad))


def test_run_experiment_deterministic_and_reconciled(desk_dataset):
    cfg = ExperimentConfig(mechanism=Mechanism.OA, agents=12, seed=4)
    r1 = run_experiment(cfg, desk_dataset)
    r2 = run_experiment(cfg, desk_dataset)
    assert r1.gas_per_phase == r2.gas_per_phase
    assert r1.behavior_means == r2.behavior_means
    assert r1.gas_total == sum(r1.gas_per_phase.values())
    assert r1.gas_total == r1.ledger.gas.total
    assert r1.ledger.phase is Phase.SETTLED
    rows = r1.csv_rows()
    assert len(rows) == len(r1.gas_per_phase)
    assert all(row.count(",") == 10 for row in rows)
    # rewards flowed: the audit already ran inside settle(), spot-check means
    assert r1.behavior_means[Behavior.TRUTHFUL] > r1.behavior_means[Behavior.ADVERSARIAL]


def test_run_experiment_rejects_small_dataset(desk_dataset):
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(agents=51), desk_dataset)


def test_sweep_packing_shapes(desk_dataset):
    base = ExperimentConfig(agents=6, seed=2)
    reports = sweep_packing(base, desk_dataset, questions=[1, 3])
    assert len(reports) == 4
    by_id = {r.config.config_id: r for r in reports}
    assert commit_reveal_gas(by_id["pack-off-q3"]) > commit_reveal_gas(by_id["pack-on-q3"])
    assert commit_reveal_gas(by_id["pack-off-q3"]) > commit_reveal_gas(by_id["pack-off-q1"])


def test_sweep_mechanisms_and_peers(desk_dataset):
    base = ExperimentConfig(agents=10, seed=2, alpha=F(1, 2))
    ds = QoSDataset.skip_one(10, 50, seed=2)
    mechs = sweep_mechanisms(base, ds)
    assert set(mechs) == set(Mechanism)
    assert all(settle_gas(r) > 0 for r in mechs.values())

    peers = sweep_peers(ExperimentConfig(mechanism=Mechanism.DG, agents=10, seed=2), ds, ks=[1])
    assert set(peers) == {"all", "1"}
    assert isinstance(peers["1"].config.peer_mode, SampledPeers)
    assert settle_gas(peers["1"]) < settle_gas(peers["all"])
