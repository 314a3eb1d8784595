"""Binary linear codes over GF(2) and the nested-pair machinery for key extraction.

Bit vectors are ``numpy.uint8`` arrays of 0/1; matrices are 2-D arrays of the
same dtype. Functions that take a vector also accept a stack of vectors
(shape ``(..., n)``) and act row-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

MAX_TABLE_LENGTH = 24


class CodeError(ValueError):
    """Malformed code, dimension mismatch, or a vector outside the expected code."""


def as_bits(v) -> np.ndarray:
    """Coerce a 0/1 sequence or a ``"0101"`` string to a uint8 array."""
    if isinstance(v, str):
        v = [int(c) for c in v.strip()]
    arr = np.asarray(v, dtype=np.uint8)
    if arr.size and arr.max(initial=0) > 1:
        raise CodeError("bit vectors may only contain 0 and 1")
    return arr


def bits_to_str(v) -> str:
    return "".join("1" if b else "0" for b in np.asarray(v).ravel())


def row_reduce(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2), pivoting on the leftmost column.

    Returns the non-zero rows of the RREF and the list of pivot columns.
    """
    a = np.array(m, dtype=np.uint8) % 2
    if a.ndim != 2:
        raise CodeError("row_reduce expects a 2-D matrix")
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(m: np.ndarray) -> int:
    m = np.asarray(m)
    if m.size == 0:
        return 0
    return len(row_reduce(m)[1])


def nullspace(m: np.ndarray, ncols: int | None = None) -> np.ndarray:
    """A basis (as rows) of ``{x : m x = 0}``."""
    m = np.asarray(m, dtype=np.uint8)
    n = m.shape[1] if m.size else ncols
    if n is None:
        raise CodeError("cannot infer the column count of an empty matrix")
    if m.size == 0:
        return np.eye(n, dtype=np.uint8)
    red, pivots = row_reduce(m)
    free = [c for c in range(n) if c not in pivots]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in zip(red, pivots):
            basis[i, p] = row[f]
    return basis


def _bits_to_int(rows: np.ndarray) -> np.ndarray:
    """Read each row as a binary number, first entry most significant."""
    rows = np.asarray(rows, dtype=np.int64)
    width = rows.shape[-1]
    if width == 0:
        return np.zeros(rows.shape[:-1], dtype=np.int64)
    weights = np.left_shift(np.int64(1), np.arange(width - 1, -1, -1, dtype=np.int64))
    return rows @ weights


def _int_to_bits(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def syndrome(h: np.ndarray, v) -> np.ndarray:
    """``h v`` over GF(2); ``v`` may be a single vector or a stack of rows."""
    h = np.asarray(h, dtype=np.uint8)
    v = as_bits(v)
    if v.shape[-1] != h.shape[1]:
        raise CodeError(f"vector length {v.shape[-1]} does not match parity-check width {h.shape[1]}")
    return ((v.astype(np.int64) @ h.T.astype(np.int64)) % 2).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LinearCode:
    """A binary ``[n, k]`` code given by a full-rank generator and a parity-check matrix."""

    generator: np.ndarray
    parity_check: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        g = np.atleast_2d(np.asarray(self.generator, dtype=np.uint8))
        h = np.asarray(self.parity_check, dtype=np.uint8)
        n = g.shape[1]
        if h.size == 0:
            h = np.zeros((0, n), dtype=np.uint8)
        h = np.atleast_2d(h)
        if h.shape[1] != n:
            raise CodeError("generator and parity-check matrices have different widths")
        if rank(g) != g.shape[0]:
            raise CodeError("generator matrix does not have full row rank")
        if ((g.astype(np.int64) @ h.T.astype(np.int64)) % 2).any():
            raise CodeError("generator rows violate the parity checks")
        if g.shape[0] + rank(h) != n:
            raise CodeError("rank(H) + k != n: parity checks do not define this code")
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "parity_check", h)

    @classmethod
    def from_generator(cls, generator, name: str = "") -> "LinearCode":
        g = np.atleast_2d(as_bits(generator))
        red, _ = row_reduce(g)
        h = nullspace(red, ncols=g.shape[1])
        return cls(red, h, name)

    @classmethod
    def from_parity_check(cls, parity_check, name: str = "") -> "LinearCode":
        h = np.atleast_2d(as_bits(parity_check))
        g = nullspace(h)
        red, _ = row_reduce(h)
        return cls(row_reduce(g)[0], red, name)

    @property
    def length(self) -> int:
        return self.generator.shape[1]

    @property
    def dimension(self) -> int:
        return self.generator.shape[0]

    def encode(self, message) -> np.ndarray:
        msg = as_bits(message)
        if msg.shape[-1] != self.dimension:
            raise CodeError(f"message length {msg.shape[-1]} != code dimension {self.dimension}")
        return ((msg.astype(np.int64) @ self.generator.astype(np.int64)) % 2).astype(np.uint8)

    def contains(self, v) -> np.ndarray | bool:
        s = syndrome(self.parity_check, v)
        out = ~s.any(axis=-1)
        return bool(out) if out.ndim == 0 else out

    def codewords(self) -> np.ndarray:
        """All ``2^k`` codewords, ordered by message value."""
        msgs = _int_to_bits(np.arange(2**self.dimension), self.dimension)
        return self.encode(msgs)

    def dual(self, name: str = "") -> "LinearCode":
        return LinearCode(row_reduce(self.parity_check)[0], self.generator, name)

    @cached_property
    def coset_leaders(self) -> np.ndarray:
        """Table of minimum-weight coset leaders indexed by integer syndrome.

        Ties are broken towards the lexicographically smallest vector (first
        bit most significant). Built once on first use.
        """
        n = self.length
        if n > MAX_TABLE_LENGTH:
            raise CodeError(f"table decoding supports n <= {MAX_TABLE_LENGTH}, got n = {n}")
        r = self.parity_check.shape[0]
        # enumerate all 2^n words as integers (position 0 = most significant bit)
        # and build their syndromes and weights by doubling
        col_synd = _bits_to_int(self.parity_check.T).astype(np.int32)
        synd = np.zeros(1, dtype=np.int32)
        weight = np.zeros(1, dtype=np.uint8)
        for j in range(n - 1, -1, -1):
            synd = np.concatenate([synd, synd ^ col_synd[j]])
            weight = np.concatenate([weight, weight + 1])
        table = np.zeros((2**r, n), dtype=np.uint8)
        filled = np.zeros(2**r, dtype=bool)
        remaining = 2**r
        for w in range(n + 1):
            words = np.flatnonzero(weight == w)
            # words are ascending, so the first hit per syndrome is the smallest
            uniq, first = np.unique(synd[words], return_index=True)
            new = ~filled[uniq]
            table[uniq[new]] = _int_to_bits(words[first[new]], n)
            filled[uniq[new]] = True
            remaining -= int(new.sum())
            if remaining == 0:
                break
        table.setflags(write=False)
        return table

    def decode(self, v) -> np.ndarray:
        """Nearest codeword to ``v`` (row-wise for stacks) by syndrome table lookup."""
        v = as_bits(v)
        if v.shape[-1] != self.length:
            raise CodeError(f"vector length {v.shape[-1]} != code length {self.length}")
        leaders = self.coset_leaders
        s = _bits_to_int(syndrome(self.parity_check, v))
        return v ^ leaders[s]


def decode_to_codeword(code: LinearCode, v) -> np.ndarray:
    return code.decode(v)


def random_codeword(code: LinearCode, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform codeword(s): encode uniformly random messages."""
    shape = (code.dimension,) if size is None else (size, code.dimension)
    msg = rng.integers(0, 2, size=shape, dtype=np.uint8)
    return code.encode(msg)


@dataclass(frozen=True, eq=False)
class NestedCodePair:
    """Codes ``C2`` inside ``C1`` of equal length; keys are cosets ``C1 / C2``.

    Construction does not enforce nesting so that ``check_nested`` can report
    on arbitrary pairs; use ``validated()`` before running a protocol.
    """

    c1: LinearCode
    c2: LinearCode
    name: str = ""

    def __post_init__(self) -> None:
        if self.c1.length != self.c2.length:
            raise CodeError("C1 and C2 have different block lengths")

    @property
    def length(self) -> int:
        return self.c1.length

    @property
    def key_length(self) -> int:
        return self.c1.dimension - self.c2.dimension

    def validated(self) -> "NestedCodePair":
        if not check_nested(self):
            raise CodeError(
                f"code pair {self.name or '<unnamed>'} is not a strictly nested pair "
                f"{{0}} < C2 < C1 (dim C1 = {self.c1.dimension}, dim C2 = {self.c2.dimension})"
            )
        return self

    @cached_property
    def coset_representatives(self) -> np.ndarray:
        """Rows of C1 completing the RREF basis of C2 to a basis of C1.

        Candidates are the RREF rows of C1 in order; a row is kept when it
        raises the rank of the span so far.
        """
        basis = row_reduce(self.c2.generator)[0]
        reps = []
        for row in row_reduce(self.c1.generator)[0]:
            trial = np.vstack([basis, row])
            if rank(trial) > basis.shape[0]:
                basis = trial
                reps.append(row)
        out = np.array(reps, dtype=np.uint8).reshape(len(reps), self.length)
        out.setflags(write=False)
        return out

    @cached_property
    def _coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        # u = c . [G2; R]; recover c from the pivot columns of that basis
        basis = np.vstack([row_reduce(self.c2.generator)[0], self.coset_representatives])
        _, pivots = row_reduce(basis)
        sub = basis[:, pivots]
        k = sub.shape[0]
        aug = np.hstack([sub.T, np.eye(k, dtype=np.uint8)])
        red, piv = row_reduce(aug)
        if piv[:k] != list(range(k)):
            raise CodeError("coset basis is singular")  # unreachable for a valid pair
        inv_t = red[:k, k:]  # inverse of sub.T
        return np.array(pivots, dtype=np.intp), inv_t.T.copy()

    def coset_label(self, u) -> np.ndarray:
        u = as_bits(u)
        if u.shape[-1] != self.length:
            raise CodeError(f"vector length {u.shape[-1]} != block length {self.length}")
        if not np.all(self.c1.contains(u)):
            raise CodeError("coset_label requires a codeword of C1")
        pivots, inv = self._coordinates
        coords = (u[..., pivots].astype(np.int64) @ inv.astype(np.int64)) % 2
        return coords[..., self.c2.dimension :].astype(np.uint8)


def coset_label(pair: NestedCodePair, u) -> np.ndarray:
    return pair.coset_label(u)


def check_nested(pair: NestedCodePair) -> bool:
    """True iff ``{0} < C2 < C1`` strictly (so at least one key bit per block)."""
    if pair.c2.dimension == 0 or pair.c2.dimension >= pair.c1.dimension:
        return False
    return bool(np.all(pair.c1.contains(pair.c2.generator)))


# -- catalog and file format -----------------------------------------------------

HAMMING_7_4_H = np.array(
    [
        [1, 0, 1, 0, 1, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1, 1],
    ],
    dtype=np.uint8,
)


def hamming_code(r: int) -> LinearCode:
    """The ``[2^r - 1, 2^r - 1 - r]`` Hamming code; column j of H is j in binary."""
    n = 2**r - 1
    cols = _int_to_bits(np.arange(1, n + 1), r)[:, ::-1]
    return LinearCode.from_parity_check(cols.T, name=f"hamming[{n},{n - r}]")


def steane_pair() -> NestedCodePair:
    c1 = LinearCode.from_parity_check(HAMMING_7_4_H, name="hamming[7,4]")
    return NestedCodePair(c1, c1.dual(name="simplex[7,3]"), name="steane")


def hamming_pair(r: int) -> NestedCodePair:
    c1 = hamming_code(r)
    return NestedCodePair(c1, c1.dual(name=f"simplex[{c1.length},{r}]"), name=f"hamming{c1.length}")


def repetition_pair(n: int) -> NestedCodePair:
    """``C1 = F_2^n`` over the repetition code: no correction, ``n - 1`` key bits."""
    full = LinearCode(np.eye(n, dtype=np.uint8), np.zeros((0, n), dtype=np.uint8), name=f"full[{n}]")
    rep = LinearCode.from_generator(np.ones((1, n), dtype=np.uint8), name=f"repetition[{n},1]")
    return NestedCodePair(full, rep, name=f"rep{n}")


CATALOG = {
    "steane": steane_pair,
    "hamming15": lambda: hamming_pair(4),
    "rep3": lambda: repetition_pair(3),
    "rep5": lambda: repetition_pair(5),
}


def catalog_pair(name: str) -> NestedCodePair:
    try:
        return CATALOG[name]().validated()
    except KeyError:
        raise CodeError(f"unknown code pair {name!r}; catalog has {sorted(CATALOG)}") from None


def parse_code_pair(text: str, name: str = "") -> NestedCodePair:
    """Parse the plain-text pair format.

    First line ``n k1 k2``, then ``k1`` generator rows of C1 and ``k2`` of C2,
    each a string of 0/1 characters. Blank lines and ``#`` comments are ignored.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise CodeError("empty code-pair file")
    try:
        n, k1, k2 = (int(x) for x in lines[0].split())
    except ValueError:
        raise CodeError(f"header must be 'n k1 k2', got {lines[0]!r}") from None
    rows = lines[1:]
    if len(rows) != k1 + k2:
        raise CodeError(f"expected {k1 + k2} generator rows, found {len(rows)}")
    if any(len(r) != n or set(r) - {"0", "1"} for r in rows):
        raise CodeError(f"generator rows must be {n} characters of 0/1")
    g1 = np.array([as_bits(r) for r in rows[:k1]], dtype=np.uint8).reshape(k1, n)
    g2 = np.array([as_bits(r) for r in rows[k1:]], dtype=np.uint8).reshape(k2, n)
    pair = NestedCodePair(LinearCode.from_generator(g1), LinearCode.from_generator(g2), name=name)
    if pair.c1.dimension != k1 or pair.c2.dimension != k2:
        raise CodeError("generator rows are linearly dependent")
    return pair.validated()


def load_code_pair(path: str | Path) -> NestedCodePair:
    path = Path(path)
    return parse_code_pair(path.read_text(), name=path.stem)


def format_code_pair(pair: NestedCodePair) -> str:
    lines = [f"{pair.length} {pair.c1.dimension} {pair.c2.dimension}"]
    lines += [bits_to_str(r) for r in pair.c1.generator]
    lines += [bits_to_str(r) for r in pair.c2.generator]
    return "\n".join(lines) + "\n"
