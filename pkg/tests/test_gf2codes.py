import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from npab.gf2codes import (
    CATALOG,
    HAMMING_7_4_H,
    CodeError,
    LinearCode,
    NestedCodePair,
    as_bits,
    catalog_pair,
    check_nested,
    coset_label,
    decode_to_codeword,
    format_code_pair,
    hamming_code,
    load_code_pair,
    nullspace,
    parse_code_pair,
    random_codeword,
    rank,
    repetition_pair,
    steane_pair,
    syndrome,
)

ALL7 = np.array(list(itertools.product([0, 1], repeat=7)), dtype=np.uint8)


def brute_codewords(h):
    """All words with zero syndrome, by exhaustive check."""
    return ALL7[[not (h.astype(int) @ w % 2).any() for w in ALL7]]


def random_matrix(draw, rows, cols):
    return np.array(draw(st.lists(st.lists(st.integers(0, 1), min_size=cols, max_size=cols), min_size=rows, max_size=rows)), dtype=np.uint8).reshape(rows, cols)


@st.composite
def matrices(draw):
    rows, cols = draw(st.integers(1, 6)), draw(st.integers(1, 9))
    return random_matrix(draw, rows, cols)


class TestLinearAlgebra:
    @given(matrices())
    def test_rank_nullity(self, m):
        ns = nullspace(m)
        assert rank(m) + ns.shape[0] == m.shape[1]
        assert not (m.astype(int) @ ns.T.astype(int) % 2).any()

    @given(matrices())
    def test_rank_matches_span_size(self, m):
        span = {tuple((np.array(c) @ m) % 2) for c in itertools.product([0, 1], repeat=m.shape[0])}
        assert len(span) == 2 ** rank(m)

    def test_as_bits(self):
        assert as_bits("0110").tolist() == [0, 1, 1, 0]
        with pytest.raises(CodeError):
            as_bits([0, 2])


class TestSyndrome:
    def test_codewords_have_zero_syndrome(self):
        code = LinearCode.from_parity_check(HAMMING_7_4_H)
        assert not syndrome(HAMMING_7_4_H, code.codewords()).any()

    def test_weight_one_error_gives_column(self):
        for i in range(7):
            e = np.zeros(7, dtype=np.uint8)
            e[i] = 1
            assert syndrome(HAMMING_7_4_H, e).tolist() == HAMMING_7_4_H[:, i].tolist()

    @given(st.lists(st.integers(0, 1), min_size=7, max_size=7), st.lists(st.integers(0, 1), min_size=7, max_size=7))
    def test_linear(self, v, w):
        v, w = np.array(v, dtype=np.uint8), np.array(w, dtype=np.uint8)
        assert (syndrome(HAMMING_7_4_H, v ^ w) == syndrome(HAMMING_7_4_H, v) ^ syndrome(HAMMING_7_4_H, w)).all()

    def test_dimension_mismatch(self):
        with pytest.raises(CodeError):
            syndrome(HAMMING_7_4_H, np.zeros(6, dtype=np.uint8))


class TestLinearCode:
    def test_hamming_codewords_match_brute_force(self):
        code = LinearCode.from_parity_check(HAMMING_7_4_H)
        assert code.dimension == 4
        got = {tuple(c) for c in code.codewords()}
        assert got == {tuple(c) for c in brute_codewords(HAMMING_7_4_H)}
        assert len(got) == 16

    def test_rejects_inconsistent_matrices(self):
        g = np.eye(2, 4, dtype=np.uint8)
        with pytest.raises(CodeError):
            LinearCode(g, np.eye(2, 4, dtype=np.uint8))

    def test_rejects_rank_deficient_generator(self):
        g = np.array([[1, 1, 0], [1, 1, 0]], dtype=np.uint8)
        with pytest.raises(CodeError):
            LinearCode(g, nullspace(g))
        assert LinearCode.from_generator(g).dimension == 1

    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_rank_nullity_catalog(self, name):
        pair = catalog_pair(name)
        for code in (pair.c1, pair.c2):
            assert code.dimension + rank(code.parity_check) == code.length

    @given(st.lists(st.integers(0, 1), min_size=4, max_size=4), st.lists(st.integers(0, 1), min_size=4, max_size=4))
    def test_encoding_is_linear(self, a, b):
        code = hamming_code(3)
        a, b = np.array(a, dtype=np.uint8), np.array(b, dtype=np.uint8)
        assert (code.encode(a ^ b) == code.encode(a) ^ code.encode(b)).all()
        assert not code.encode(np.zeros(4, dtype=np.uint8)).any()


class TestDecode:
    code = LinearCode.from_parity_check(HAMMING_7_4_H)

    def test_codewords_fixed(self):
        for c in self.code.codewords():
            assert (decode_to_codeword(self.code, c) == c).all()

    def test_corrects_all_single_errors_exhaustively(self):
        words = brute_codewords(HAMMING_7_4_H)
        for v in ALL7:
            dist = (words ^ v).sum(axis=1)
            if dist.min() == 1:
                assert (decode_to_codeword(self.code, v) == words[dist.argmin()]).all()

    def test_minimum_distance_on_every_word(self):
        words = brute_codewords(HAMMING_7_4_H)
        for v in ALL7:
            d = decode_to_codeword(self.code, v)
            assert (d ^ v).sum() == (words ^ v).sum(axis=1).min()

    def test_some_weight_two_error_is_miscorrected(self):
        c = np.zeros(7, dtype=np.uint8)
        bad = [e for e in ALL7 if e.sum() == 2 and (decode_to_codeword(self.code, c ^ e) != c).any()]
        assert bad

    def test_leader_ties_break_lexicographically(self):
        # in the [4,1] repetition code 1100 and 0011 share a syndrome
        code = LinearCode.from_generator(np.ones((1, 4), dtype=np.uint8))
        leaders = {tuple(x) for x in code.coset_leaders}
        assert (0, 0, 1, 1) in leaders and (1, 1, 0, 0) not in leaders

    def test_too_long_for_table(self):
        code = LinearCode.from_generator(np.ones((1, 25), dtype=np.uint8))
        with pytest.raises(CodeError):
            code.decode(np.zeros(25, dtype=np.uint8))

    def test_batch_decode(self):
        v = ALL7[:20]
        assert (self.code.decode(v) == np.array([self.code.decode(x) for x in v])).all()


class TestRandomCodeword:
    code = LinearCode.from_parity_check(HAMMING_7_4_H)

    def test_uniform_over_codewords(self):
        draws = random_codeword(self.code, np.random.default_rng(3), size=100_000)
        assert not syndrome(HAMMING_7_4_H, draws).any()
        _, counts = np.unique(draws, axis=0, return_counts=True)
        assert len(counts) == 16
        assert sps.chisquare(counts).pvalue > 0.01

    def test_deterministic(self):
        a = random_codeword(self.code, np.random.default_rng(5))
        b = random_codeword(self.code, np.random.default_rng(5))
        assert (a == b).all()


class TestNestedPair:
    pair = steane_pair()

    def test_steane_shape(self):
        assert check_nested(self.pair)
        assert self.pair.key_length == 1
        assert self.pair.c2.dimension == 3

    def test_steane_two_cosets_of_eight(self):
        words = self.pair.c1.codewords()
        labels = coset_label(self.pair, words).ravel()
        assert sorted(np.bincount(labels).tolist()) == [8, 8]
        # the two classes are exactly the cosets of C2, by brute force
        c2 = {tuple(w) for w in self.pair.c2.codewords()}
        for u, lu in zip(words, labels):
            for v, lv in zip(words, labels):
                assert (lu == lv) == (tuple(u ^ v) in c2)

    def test_label_zero_on_c2_and_coset_invariant(self):
        for w in self.pair.c2.codewords():
            assert not coset_label(self.pair, w).any()
            for u in self.pair.c1.codewords():
                assert (coset_label(self.pair, u ^ w) == coset_label(self.pair, u)).all()

    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_label_linear_and_surjective(self, name):
        pair = catalog_pair(name)
        rng = np.random.default_rng(0)
        u = random_codeword(pair.c1, rng, size=200)
        v = random_codeword(pair.c1, rng, size=200)
        assert (pair.coset_label(u ^ v) == pair.coset_label(u) ^ pair.coset_label(v)).all()
        labels = {tuple(x) for x in pair.coset_label(random_codeword(pair.c1, rng, size=2000))}
        assert len(labels) == 2**pair.key_length

    def test_label_rejects_non_codeword(self):
        with pytest.raises(CodeError):
            coset_label(self.pair, np.array([1, 0, 0, 0, 0, 0, 0], dtype=np.uint8))

    def test_steane_reconciliation_exhaustive(self):
        c1 = self.pair.c1
        for u in c1.codewords():
            for i in range(-1, 7):
                e = np.zeros(7, dtype=np.uint8)
                if i >= 0:
                    e[i] = 1
                assert (coset_label(self.pair, decode_to_codeword(c1, u ^ e)) == coset_label(self.pair, u)).all()

    def test_check_nested_rejects(self):
        h = LinearCode.from_parity_check(HAMMING_7_4_H)
        assert not check_nested(NestedCodePair(h, h))
        full = LinearCode(np.eye(7, dtype=np.uint8), np.zeros((0, 7), dtype=np.uint8))
        zero = LinearCode(np.zeros((0, 7), dtype=np.uint8), np.eye(7, dtype=np.uint8))
        assert not check_nested(NestedCodePair(full, zero))
        # C2 not inside C1
        other = LinearCode.from_generator(np.array([[1, 0, 0, 0, 0, 0, 0]]))
        assert not check_nested(NestedCodePair(h, other))

    def test_repetition_pair(self):
        pair = repetition_pair(3)
        assert pair.key_length == 2
        assert not pair.coset_label(np.array([1, 1, 1], dtype=np.uint8)).any()


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        for name in CATALOG:
            pair = catalog_pair(name)
            path = tmp_path / f"{name}.txt"
            path.write_text("# comment\n" + format_code_pair(pair))
            loaded = load_code_pair(path)
            assert loaded.key_length == pair.key_length
            u = random_codeword(pair.c1, np.random.default_rng(1), size=50)
            assert loaded.c1.contains(u).all()

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "7 4\n",
            "3 2 1\n110\n011\n",
            "3 2 1\n110\n011\n1x1\n",
            "3 2 1\n110\n110\n000\n",
            "3 1 1\n110\n011\n",
        ],
    )
    def test_rejects_malformed(self, text):
        with pytest.raises(CodeError):
            parse_code_pair(text)
