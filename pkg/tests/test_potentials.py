import numpy as np
import pytest

from pschrod.grid import GridSpec
from pschrod.potentials import (
    bad_set_measure,
    bad_set_measure_mc,
    confinement_report,
    polynomial_trap,
    sample_potential,
    sparse_wells,
)

WELLS_GAMMA = 2.0


@pytest.fixture(scope="module")
def fine_wells_grid():
    # h = 1/4096 resolves every well with center inside |x| <= 40
    return GridSpec(n=1, L=40.0, m=327681)


def eval_at(pot, x):
    return float(np.asarray(pot.evaluator(np.asarray([x], dtype=float))).ravel()[0])


def test_trap_values():
    trap = polynomial_trap(gamma=2.0)
    assert eval_at(trap, 0.0) == 1.0
    assert eval_at(trap, 2.0) == 5.0
    assert trap.kappa == 1.0


def test_trap_rejects_bad_gamma():
    with pytest.raises(ValueError):
        polynomial_trap(gamma=0.0)
    with pytest.raises(ValueError):
        sparse_wells(gamma=-1.0)


def test_trap_has_empty_bad_sets():
    trap = polynomial_trap(gamma=2.0)
    spec = GridSpec(1, 10.0, 2001)
    for R in (0.0, 1.0, 3.0, 7.5):
        assert bad_set_measure(trap, spec, R) == 0.0


def test_wells_pointwise_values():
    wells = sparse_wells(gamma=WELLS_GAMMA)
    assert eval_at(wells, 2.0) == 1.0  # center of the first well
    assert eval_at(wells, 0.0) == 1.0  # origin lies outside every well
    assert eval_at(wells, 3.0) == 1.0 + 9.0
    assert eval_at(wells, 4.0) == 1.0  # second well center


def test_wells_total_measure_infinite_series(fine_wells_grid):
    wells = sparse_wells(gamma=WELLS_GAMMA)
    total = bad_set_measure(wells, fine_wells_grid, 0.0)
    assert total == pytest.approx(2.0 / 3.0, rel=0.02)


def test_wells_tail_measure_one_sixth(fine_wells_grid):
    wells = sparse_wells(gamma=WELLS_GAMMA)
    e3 = bad_set_measure(wells, fine_wells_grid, 3.0)
    assert e3 == pytest.approx(1.0 / 6.0, rel=0.02)


def test_wells_in_small_box_hand_enumeration():
    # box [-10, 10]: wells at 2, 4, 8 with radii 1/4, 1/16, 1/64
    spec = GridSpec(1, 10.0, 81921)
    wells = sparse_wells(gamma=WELLS_GAMMA)
    expected = 2.0 * (1.0 / 4.0 + 1.0 / 16.0 + 1.0 / 64.0)
    assert bad_set_measure(wells, spec, 0.0) == pytest.approx(expected, rel=0.02)


def test_bad_measure_nonincreasing(fine_wells_grid):
    wells = sparse_wells(gamma=WELLS_GAMMA)
    Vg = sample_potential(wells, fine_wells_grid)
    measures = [
        bad_set_measure(wells, fine_wells_grid, R, Vg=Vg)
        for R in (0.0, 1.0, 3.0, 5.0, 9.0, 17.0)
    ]
    assert all(b <= a for a, b in zip(measures, measures[1:]))


def test_sampled_potential_at_least_one(fine_wells_grid):
    Vg = sample_potential(sparse_wells(gamma=WELLS_GAMMA), fine_wells_grid)
    assert float(Vg.values.min()) >= 1.0


def test_confinement_report_trap():
    trap = polynomial_trap(gamma=2.0)
    spec = GridSpec(1, 10.0, 2001)
    rep = confinement_report(trap, spec, [1.0, 2.0, 4.0, 8.0])
    assert rep.bad_measures == (0.0, 0.0, 0.0, 0.0)
    assert rep.classically_confining
    assert rep.violation_witness is None
    assert rep.total_bad_measure == 0.0


def test_confinement_report_wells_witness(fine_wells_grid):
    wells = sparse_wells(gamma=WELLS_GAMMA)
    rep = confinement_report(wells, fine_wells_grid, [2.0, 3.0, 6.0, 12.0, 24.0])
    assert not rep.classically_confining
    assert rep.violation_witness is not None
    assert rep.violation_witness[0] == pytest.approx(32.0, abs=1e-9)
    assert all(b <= a for a, b in zip(rep.bad_measures, rep.bad_measures[1:]))
    assert rep.total_bad_measure >= rep.bad_measures[-1]
    # geometric tail: |E_R| for R just above 2^j is sum_{k > j} 2 r_k
    e_measured = dict(zip(rep.R_grid, rep.bad_measures))
    assert e_measured[3.0] == pytest.approx(1.0 / 6.0, rel=0.02)
    assert e_measured[6.0] == pytest.approx(2.0 * (1 / 64.0 + 1 / 256.0 + 1 / 1024.0), rel=0.02)


def test_confinement_report_flags_sub_resolution_wells():
    spec = GridSpec(1, 40.0, 641)  # h = 1/8: wells 3, 4, 5 are narrower than h
    wells = sparse_wells(gamma=WELLS_GAMMA)
    rep = confinement_report(wells, spec, [2.0, 4.0])
    assert len(rep.sub_resolution_wells) >= 2


def test_confinement_report_validation(fine_wells_grid):
    wells = sparse_wells(gamma=WELLS_GAMMA)
    with pytest.raises(ValueError):
        confinement_report(wells, fine_wells_grid, [])
    with pytest.raises(ValueError):
        confinement_report(wells, fine_wells_grid, [3.0, 2.0])
    with pytest.raises(ValueError):
        confinement_report(wells, fine_wells_grid, [2.0, 41.0])


def test_monte_carlo_cross_check():
    spec = GridSpec(1, 40.0, 327681)
    wells = sparse_wells(gamma=WELLS_GAMMA)
    quad = bad_set_measure(wells, spec, 3.0)
    mc = bad_set_measure_mc(wells, spec, 3.0, samples=2_000_000, seed=11)
    assert mc == pytest.approx(quad, rel=0.1)
    assert bad_set_measure_mc(wells, spec, 3.0, samples=10_000, seed=5) == \
        bad_set_measure_mc(wells, spec, 3.0, samples=10_000, seed=5)


def test_potential_pair_validation():
    with pytest.raises(ValueError):
        polynomial_trap(2.0).with_pair(0.0, 2.0)
