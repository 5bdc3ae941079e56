import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsl.seqcore import (
    Alphabet,
    AlphabetMismatch,
    Dataset,
    Item,
    SamplePair,
    filter_by_length,
    format_pairs,
    log_sum_exp,
    make_rng,
    parse_pairs,
    read_dataset,
    split_dataset,
    write_dataset,
)


def make_pairs(n, alphabet=Alphabet(5)):
    return [SamplePair(Item((i % 5,), alphabet), Item((i % 3, i % 2), alphabet)) for i in range(n)]


class TestAlphabetAndItem:
    def test_markers_sit_above_payload(self):
        a = Alphabet(6)
        assert (a.bos, a.eos) == (6, 7)

    def test_too_small(self):
        with pytest.raises(ValueError):
            Alphabet(1)

    def test_token_out_of_range(self):
        with pytest.raises(AlphabetMismatch, match="alphabet mismatch"):
            Item((0, 4), Alphabet(4))

    def test_empty_item(self):
        with pytest.raises(ValueError):
            Item((), Alphabet(4))

    def test_label(self):
        assert Item((2,), Alphabet(3)).label == 2
        with pytest.raises(ValueError):
            Item((1, 2), Alphabet(3)).label


class TestLogSumExp:
    def test_two_zeros(self):
        assert log_sum_exp([0, 0]) == pytest.approx(0.693147, abs=1e-6)

    def test_no_underflow(self):
        assert log_sum_exp([-1000, -1000]) == pytest.approx(-1000 + math.log(2), abs=1e-12)

    def test_singleton(self):
        assert log_sum_exp([3]) == 3

    def test_empty(self):
        with pytest.raises(ValueError, match="empty reduction"):
            log_sum_exp([])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_bounds(self, values):
        lse = log_sum_exp(values)
        m = max(values)
        assert lse >= m - 1e-9 * max(1.0, abs(m))
        assert lse <= m + math.log(len(values)) + 1e-9 * max(1.0, abs(m))


class TestRng:
    def test_reproducible_stream(self):
        a = make_rng(123).random(10_000)
        b = make_rng(123).random(10_000)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        assert not np.array_equal(make_rng(1).random(10), make_rng(2).random(10))


class TestSplitDataset:
    def test_sizes_10(self):
        tr, va, te = split_dataset(make_pairs(10), (0.8, 0.1, 0.1), make_rng(7))
        assert (len(tr), len(va), len(te)) == (8, 1, 1)
        assert (tr.split, va.split, te.split) == ("train", "valid", "test")

    def test_sizes_100(self):
        sizes = tuple(len(d) for d in split_dataset(make_pairs(100), (0.7, 0.15, 0.15), make_rng(0)))
        assert sizes == (70, 15, 15)

    def test_deterministic(self):
        first = split_dataset(make_pairs(10), (0.8, 0.1, 0.1), make_rng(7))
        second = split_dataset(make_pairs(10), (0.8, 0.1, 0.1), make_rng(7))
        assert first == second

    def test_largest_remainder_ties_go_to_earlier_split(self):
        # 4 * (0.5, 0.25, 0.25) is exact; 5 * (0.4, 0.3, 0.3) = (2, 1.5, 1.5) -> valid wins the tie
        sizes = tuple(len(d) for d in split_dataset(make_pairs(5), (0.4, 0.3, 0.3), make_rng(0)))
        assert sizes == (2, 2, 1)

    def test_too_small(self):
        with pytest.raises(ValueError, match="dataset too small"):
            split_dataset(make_pairs(2), (0.8, 0.1, 0.1), make_rng(0))

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            split_dataset(make_pairs(10), (0.5, 0.3, 0.3), make_rng(0))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 200), st.integers(0, 2**32))
    def test_partition(self, n, seed):
        pairs = make_pairs(n)
        splits = split_dataset(pairs, (0.6, 0.2, 0.2), make_rng(seed))
        ids = [id(p) for d in splits for p in d]
        assert sorted(ids) == sorted(id(p) for p in pairs)
        assert len(set(ids)) == n


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        a = Alphabet(5)
        pairs = make_pairs(7, a)
        path = tmp_path / "d.txt"
        write_dataset(path, pairs, header="toy data\nseed 3")
        assert read_dataset(path, a, a) == Dataset(tuple(pairs))

    def test_comments_and_blank_lines(self):
        a = Alphabet(4)
        pairs = parse_pairs("# comment\n\n1 2\t3\n", a, a)
        assert pairs == [SamplePair(Item((1, 2), a), Item((3,), a))]

    def test_format(self):
        a = Alphabet(4)
        assert format_pairs([SamplePair(Item((1, 2), a), Item((3,), a))]) == "1 2\t3\n"

    def test_bad_line_reports_number(self):
        a = Alphabet(4)
        with pytest.raises(ValueError, match="line 2"):
            parse_pairs("1\t2\n1 9\t2\n", a, a)

    def test_length_filter(self):
        a = Alphabet(4)
        long_pair = SamplePair(Item((1,) * 40, a), Item((2,), a))
        short_pair = SamplePair(Item((1,), a), Item((2,), a))
        assert filter_by_length([long_pair, short_pair]) == [short_pair]
