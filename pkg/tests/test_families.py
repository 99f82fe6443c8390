import numpy as np

from tentlab import families as fam
from tentlab.measures import barycenter


def test_cases_replay_independently():
    a = fam.sweep_case(5, 17)
    b = fam.sweep_case(5, 17)
    assert a.label == b.label
    for x, y in zip(a.items, b.items):
        np.testing.assert_array_equal(np.asarray(getattr(x, "values", getattr(x, "mean", None))),
                                      np.asarray(getattr(y, "values", getattr(y, "mean", None))))
    assert fam.case_rng(5, 17).random() == fam.case_rng(5, 17).random()
    assert fam.case_rng(5, 17).random() != fam.case_rng(5, 18).random()


def test_centered_draws_are_centered():
    for i in range(40):
        mu = fam.sweep_case(3, i).items[0]
        assert np.linalg.norm(barycenter(mu)) <= 1e-6
        target, = fam.moment_map_target(3, i).items
        assert abs(barycenter(target)[0]) <= 1e-9


def test_admissible_pairs_are_admissible():
    from tentlab.inequalities import SantaloPair
    for i in range(10):
        SantaloPair(*fam.random_admissible_pair(2, i).items)
