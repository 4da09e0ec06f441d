from urdforge.rng import Rng, child_seed


def test_same_seed_same_stream():
    a, b = Rng(42), Rng(42)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]


def test_child_seeds_distinct():
    seeds = {child_seed(5, i) for i in range(10000)}
    assert len(seeds) == 10000


def test_random_in_unit_interval():
    r = Rng(1)
    xs = [r.random() for _ in range(5000)]
    assert min(xs) >= 0.0 and max(xs) < 1.0
    assert abs(sum(xs) / len(xs) - 0.5) < 0.02


def test_randint_inclusive_and_below():
    r = Rng(3)
    vals = {r.randint(5, 7) for _ in range(500)}
    assert vals == {5, 6, 7}
    assert {r.below(4) for _ in range(500)} == {0, 1, 2, 3}


def test_weighted_index_skips_zero_weight():
    r = Rng(9)
    picks = [r.weighted_index([0.0, 1.0, 3.0]) for _ in range(4000)]
    assert 0 not in picks
    share = picks.count(2) / len(picks)
    assert 0.72 < share < 0.78


def test_shuffle_is_permutation():
    r = Rng(11)
    items = list(range(50))
    r.shuffle(items)
    assert sorted(items) == list(range(50))
    assert items != list(range(50))
