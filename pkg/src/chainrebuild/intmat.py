"""Sparse integer matrices with exact arithmetic.

Matrices are stored in compressed sparse column form with sorted row
indices and no stored zeros, so two equal matrices always have identical
arrays.  Values sit in an ``int64`` array while every magnitude is below
``2**62``; a result that might leave that range is computed on Python
integers instead and kept in an object array.  Overflow is ruled out by a
bound check before each compiled kernel runs, never detected after.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from numba import njit

_LIMIT = 1 << 62
_INDEX = np.int64
_ZEROS: dict = {}


@njit(cache=True)
def _product_pattern(nrows, a_ptr, a_idx, b_ptr, b_idx):
    ncols = b_ptr.shape[0] - 1
    mark = np.full(nrows, -1, np.int64)
    c_ptr = np.zeros(ncols + 1, np.int64)
    for j in range(ncols):
        count = 0
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_idx[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                i = a_idx[q]
                if mark[i] != j:
                    mark[i] = j
                    count += 1
        c_ptr[j + 1] = c_ptr[j] + count
    c_idx = np.empty(c_ptr[ncols], np.int64)
    mark[:] = -1
    for j in range(ncols):
        pos = c_ptr[j]
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_idx[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                i = a_idx[q]
                if mark[i] != j:
                    mark[i] = j
                    c_idx[pos] = i
                    pos += 1
        lo, hi = c_ptr[j], c_ptr[j + 1]
        if hi - lo > 32:
            c_idx[lo:hi].sort()
        else:
            for p in range(lo + 1, hi):
                v = c_idx[p]
                q = p - 1
                while q >= lo and c_idx[q] > v:
                    c_idx[q + 1] = c_idx[q]
                    q -= 1
                c_idx[q + 1] = v
    return c_ptr, c_idx


def _product_values(nrows, a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, c_ptr, c_idx, c_val):
    slot = np.zeros(nrows, np.int64)
    for j in range(c_ptr.shape[0] - 1):
        for p in range(c_ptr[j], c_ptr[j + 1]):
            slot[c_idx[p]] = p
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_idx[p]
            v = b_val[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                c_val[slot[a_idx[q]]] += a_val[q] * v




@njit(cache=True)
def _product_small(nrows, a_ptr, a_idx, a_val, b_ptr, b_idx, b_val):
    ncols = b_ptr.shape[0] - 1
    flops = 0
    for p in range(b_idx.shape[0]):
        k = b_idx[p]
        flops += a_ptr[k + 1] - a_ptr[k]
    c_ptr = np.zeros(ncols + 1, np.int64)
    c_idx = np.empty(flops, np.int64)
    c_val = np.empty(flops, np.int64)
    acc = np.zeros(nrows, np.int64)
    mark = np.full(nrows, -1, np.int64)
    touched = np.empty(nrows, np.int64)
    pos = 0
    for j in range(ncols):
        nt = 0
        lo = nrows
        hi = -1
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_idx[p]
            v = b_val[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                i = a_idx[q]
                if mark[i] != j:
                    mark[i] = j
                    acc[i] = 0
                    touched[nt] = i
                    nt += 1
                    if i < lo:
                        lo = i
                    if i > hi:
                        hi = i
                acc[i] += a_val[q] * v
        if nt > 0 and hi - lo < 4 * nt:
            # dense enough: a scan of the touched range is already sorted
            for i in range(lo, hi + 1):
                if mark[i] == j and acc[i] != 0:
                    c_idx[pos] = i
                    c_val[pos] = acc[i]
                    pos += 1
        elif nt > 0:
            rows = np.sort(touched[:nt])
            for t in range(nt):
                i = rows[t]
                if acc[i] != 0:
                    c_idx[pos] = i
                    c_val[pos] = acc[i]
                    pos += 1
        c_ptr[j + 1] = pos
    return c_ptr, c_idx[:pos].copy(), c_val[:pos].copy()


@njit(cache=True)
def _sum_small(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, sign):
    ncols = a_ptr.shape[0] - 1
    n = a_idx.shape[0] + b_idx.shape[0]
    c_ptr = np.zeros(ncols + 1, np.int64)
    c_idx = np.empty(n, np.int64)
    c_val = np.empty(n, np.int64)
    pos = 0
    for j in range(ncols):
        p, pe = a_ptr[j], a_ptr[j + 1]
        q, qe = b_ptr[j], b_ptr[j + 1]
        while p < pe or q < qe:
            if q >= qe or (p < pe and a_idx[p] < b_idx[q]):
                i, v = a_idx[p], a_val[p]
                p += 1
            elif p >= pe or b_idx[q] < a_idx[p]:
                i, v = b_idx[q], sign * b_val[q]
                q += 1
            else:
                i, v = a_idx[p], a_val[p] + sign * b_val[q]
                p += 1
                q += 1
            if v != 0:
                c_idx[pos] = i
                c_val[pos] = v
                pos += 1
        c_ptr[j + 1] = pos
    return c_ptr, c_idx[:pos].copy(), c_val[:pos].copy()


@njit(cache=True)
def _abs_max(values):
    best = 0
    for v in values:
        if v < 0:
            v = -v
        if v > best:
            best = v
    return best


@njit(cache=True)
def _max_column_abs_sum(ptr, values):
    best = 0
    for j in range(ptr.shape[0] - 1):
        total = 0
        for p in range(ptr[j], ptr[j + 1]):
            v = values[p]
            total += v if v > 0 else -v
        if total > best:
            best = total
    return best


@njit(cache=True)
def _fill_ranges(starts, lengths, value):
    n = lengths.shape[0]
    ptr = np.zeros(n + 1, np.int64)
    for j in range(n):
        ptr[j + 1] = ptr[j] + lengths[j]
    idx = np.empty(ptr[n], np.int64)
    val = np.full(ptr[n], value, np.int64)
    for j in range(n):
        s = starts[j]
        for t in range(lengths[j]):
            idx[ptr[j] + t] = s + t
    return ptr, idx, val


@njit(cache=True)
def _scatter_product(acc, j, ap, ai, av, bp, bi, bv, sign):
    for p in range(bp[j], bp[j + 1]):
        k = bi[p]
        v = bv[p] * sign
        for q in range(ap[k], ap[k + 1]):
            acc[ai[q]] += av[q] * v


@njit(cache=True)
def _product_rows_zero(acc, j, ap, ai, bp, bi):
    for p in range(bp[j], bp[j + 1]):
        k = bi[p]
        for q in range(ap[k], ap[k + 1]):
            if acc[ai[q]] != 0:
                return False
    return True


@njit(cache=True)
def _rows_zero(acc, j, cp, ci):
    for p in range(cp[j], cp[j + 1]):
        if acc[ci[p]] != 0:
            return False
    return True


@njit(cache=True)
def _residual_is_zero(nrows, ncols, a1p, a1i, a1v, b1p, b1i, b1v, s1, a2p, a2i, a2v, b2p, b2i, b2v, s2,
                      c3p, c3i, c3v, s3, c4p, c4i, c4v, s4):
    # Scatter every contribution to column j, then re-walk the same rows.
    # While the answer is yes, every touched entry is back to zero, so the
    # accumulator never needs clearing.
    acc = np.zeros(nrows, np.int64)
    for j in range(ncols):
        _scatter_product(acc, j, a1p, a1i, a1v, b1p, b1i, b1v, s1)
        _scatter_product(acc, j, a2p, a2i, a2v, b2p, b2i, b2v, s2)
        for p in range(c3p[j], c3p[j + 1]):
            acc[c3i[p]] += c3v[p] * s3
        for p in range(c4p[j], c4p[j + 1]):
            acc[c4i[p]] += c4v[p] * s4
        if not (_product_rows_zero(acc, j, a1p, a1i, b1p, b1i) and _product_rows_zero(acc, j, a2p, a2i, b2p, b2i)
                and _rows_zero(acc, j, c3p, c3i) and _rows_zero(acc, j, c4p, c4i)):
            return False
    return True


def _column_ids(ptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(ptr.shape[0] - 1, dtype=_INDEX), np.diff(ptr))


def _narrow(values: np.ndarray) -> np.ndarray:
    """Return ``values`` as int64 when every entry is small, else as objects."""
    if values.dtype == np.int64:
        return values
    if values.size == 0:
        return values.astype(np.int64)
    if all(-_LIMIT < int(v) < _LIMIT for v in values):
        return values.astype(np.int64)
    return values


def _as_values(values: Iterable[int]) -> np.ndarray:
    items = [int(v) for v in values]
    if all(-_LIMIT < v < _LIMIT for v in items):
        return np.array(items, dtype=np.int64)
    out = np.empty(len(items), dtype=object)
    out[:] = items
    return out


def _max_abs(values: np.ndarray) -> int:
    if values.size == 0:
        return 0
    if values.dtype == np.int64:
        return int(_abs_max(values))
    return max(abs(int(v)) for v in values)


class IntMatrix:
    """Immutable sparse matrix over the integers.

    Parameters
    ----------
    nrows, ncols : int
        Shape of the matrix.
    indptr, indices, data : numpy.ndarray
        Canonical compressed-column arrays.  Use the ``from_*`` constructors
        unless the arrays are already canonical.
    """

    __slots__ = ("nrows", "ncols", "indptr", "indices", "data", "_amax")

    def __init__(self, nrows: int, ncols: int, indptr: np.ndarray, indices: np.ndarray, data: np.ndarray):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self._amax = None

    # construction -----------------------------------------------------

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "IntMatrix":
        key = (nrows, ncols)
        z = _ZEROS.get(key)
        if z is None:
            z = cls(nrows, ncols, np.zeros(ncols + 1, _INDEX), np.zeros(0, _INDEX), np.zeros(0, np.int64))
            if len(_ZEROS) < 4096:
                _ZEROS[key] = z
        return z

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(n, n, np.arange(n + 1, dtype=_INDEX), np.arange(n, dtype=_INDEX), np.ones(n, np.int64))

    @classmethod
    def from_coo(cls, nrows: int, ncols: int, rows, cols, values) -> "IntMatrix":
        """Build from coordinate arrays; duplicates are summed, zeros dropped."""
        rows = np.asarray(rows, dtype=_INDEX).reshape(-1)
        cols = np.asarray(cols, dtype=_INDEX).reshape(-1)
        if isinstance(values, np.ndarray) and values.dtype in (np.int64, object):
            vals = values.reshape(-1)
        else:
            vals = _as_values(values)
        if rows.size and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
            raise IndexError("matrix entry outside the declared shape")
        return cls._canonical(nrows, ncols, rows, cols, vals)

    @classmethod
    def from_column_ranges(cls, nrows: int, starts, lengths, value: int = 1) -> "IntMatrix":
        """Column ``j`` holds ``value`` in rows ``starts[j] .. starts[j] + lengths[j] - 1``."""
        starts = np.asarray(starts, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if value == 0:
            return cls.zeros(nrows, lengths.shape[0])
        if np.any(lengths < 0) or np.any((lengths > 0) & ((starts < 0) | (starts + lengths > nrows))):
            raise ValueError("column range out of bounds")
        ptr, idx, val = _fill_ranges(starts, lengths, int(value))
        return cls(nrows, lengths.shape[0], ptr, idx, val)

    @classmethod
    def from_entries(cls, nrows: int, ncols: int, entries: Iterable[tuple[int, int, int]]) -> "IntMatrix":
        entries = list(entries)
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        return cls.from_coo(nrows, ncols, rows, cols, [e[2] for e in entries])

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence[int]], ncols: int | None = None) -> "IntMatrix":
        nrows = len(rows)
        if ncols is None:
            ncols = len(rows[0]) if nrows else 0
        entries = [(i, j, v) for i, row in enumerate(rows) for j, v in enumerate(row) if v]
        for row in rows:
            if len(row) != ncols:
                raise ValueError("ragged dense matrix")
        return cls.from_entries(nrows, ncols, entries)

    @classmethod
    def from_columns(cls, nrows: int, columns: Sequence[Mapping[int, int]]) -> "IntMatrix":
        entries = [(i, j, v) for j, col in enumerate(columns) for i, v in col.items()]
        return cls.from_entries(nrows, len(columns), entries)

    @classmethod
    def _canonical(cls, nrows, ncols, rows, cols, vals) -> "IntMatrix":
        if rows.size == 0:
            return cls.zeros(nrows, ncols)
        order = np.lexsort((rows, cols))
        rows = rows[order]
        cols = cols[order]
        vals = vals[order]
        key = cols * max(nrows, 1) + rows
        if key.size > 1 and not np.all(key[1:] != key[:-1]):
            starts = np.flatnonzero(np.concatenate(([True], key[1:] != key[:-1])))
            if vals.dtype == np.int64 and int(np.abs(vals).sum()) >= _LIMIT:
                vals = vals.astype(object)
            vals = np.add.reduceat(vals, starts)
            rows = rows[starts]
            cols = cols[starts]
        keep = vals != 0
        if not keep.all():
            rows = rows[keep]
            cols = cols[keep]
            vals = vals[keep]
        ptr = np.zeros(ncols + 1, _INDEX)
        np.cumsum(np.bincount(cols, minlength=ncols), out=ptr[1:])
        return cls(nrows, ncols, ptr, rows, _narrow(vals))

    # basic access -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def is_zero(self) -> bool:
        return self.indices.shape[0] == 0

    def column(self, j: int) -> dict[int, int]:
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return {int(i): int(v) for i, v in zip(self.indices[lo:hi], self.data[lo:hi])}

    def columns(self) -> list[dict[int, int]]:
        return [self.column(j) for j in range(self.ncols)]

    def entries(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(row, col, value)`` in column-major order."""
        cols = _column_ids(self.indptr)
        for i, j, v in zip(self.indices, cols, self.data):
            yield int(i), int(j), int(v)

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.ncols for _ in range(self.nrows)]
        for i, j, v in self.entries():
            out[i][j] = v
        return out

    def __repr__(self) -> str:
        return f"IntMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None

    # arithmetic -------------------------------------------------------

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        if self.is_zero() or other.is_zero():
            return IntMatrix.zeros(self.nrows, other.ncols)
        small = self.data.dtype == np.int64 and other.data.dtype == np.int64
        if small:
            b_max = float(other.max_abs())
            small = self.nnz * float(self.max_abs()) * b_max < 2.0 ** 61
            if not small:
                bound = np.bincount(self.indices, weights=np.abs(self.data).astype(np.float64)).max()
                small = bound * b_max < 2.0 ** 61
        if small:
            ptr, idx, vals = _product_small(self.nrows, self.indptr, self.indices, self.data,
                                            other.indptr, other.indices, other.data)
            return IntMatrix(self.nrows, other.ncols, ptr, idx, vals)
        ptr, idx = _product_pattern(self.nrows, self.indptr, self.indices, other.indptr, other.indices)
        vals = np.empty(idx.shape[0], dtype=object)
        vals[:] = 0
        _product_values(self.nrows, self.indptr, self.indices, self.data.astype(object),
                        other.indptr, other.indices, other.data.astype(object), ptr, idx, vals)
        keep = vals != 0
        if not keep.all():
            counts = np.bincount(_column_ids(ptr)[keep], minlength=other.ncols)
            ptr = np.zeros(other.ncols + 1, _INDEX)
            np.cumsum(counts, out=ptr[1:])
            idx = idx[keep]
            vals = vals[keep]
        return IntMatrix(self.nrows, other.ncols, ptr, idx, _narrow(vals))

    def _combine(self, other: "IntMatrix", sign: int) -> "IntMatrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        if other.is_zero():
            return self
        if self.is_zero():
            return other if sign == 1 else -other
        if (self.data.dtype == np.int64 and other.data.dtype == np.int64
                and self.max_abs() + other.max_abs() < _LIMIT):
            ptr, idx, vals = _sum_small(self.indptr, self.indices, self.data,
                                        other.indptr, other.indices, other.data, sign)
            return IntMatrix(self.nrows, self.ncols, ptr, idx, vals)
        rows = np.concatenate((self.indices, other.indices))
        cols = np.concatenate((_column_ids(self.indptr), _column_ids(other.indptr)))
        right = other.data if sign == 1 else -other.data
        if self.data.dtype == np.int64 and right.dtype == np.int64:
            vals = np.concatenate((self.data, right))
        else:
            vals = np.concatenate((self.data.astype(object), right.astype(object)))
        return IntMatrix._canonical(self.nrows, self.ncols, rows, cols, vals)

    def __add__(self, other: "IntMatrix") -> "IntMatrix":
        return self._combine(other, 1)

    def __sub__(self, other: "IntMatrix") -> "IntMatrix":
        return self._combine(other, -1)

    def __neg__(self) -> "IntMatrix":
        return IntMatrix(self.nrows, self.ncols, self.indptr, self.indices, -self.data)

    def scale(self, k: int) -> "IntMatrix":
        k = int(k)
        if k == 0 or self.is_zero():
            return IntMatrix.zeros(self.nrows, self.ncols)
        if self.data.dtype == np.int64 and abs(k) * self.max_abs() < _LIMIT:
            return IntMatrix(self.nrows, self.ncols, self.indptr, self.indices, self.data * k)
        return IntMatrix(self.nrows, self.ncols, self.indptr, self.indices, _narrow(self.data.astype(object) * k))

    def __rmul__(self, k: int) -> "IntMatrix":
        return self.scale(k)

    @property
    def T(self) -> "IntMatrix":
        return IntMatrix._canonical(self.ncols, self.nrows, _column_ids(self.indptr), self.indices.copy(), self.data)

    # structure --------------------------------------------------------

    def take(self, rows: Sequence[int] | None = None, cols: Sequence[int] | None = None) -> "IntMatrix":
        """Submatrix with rows and columns listed in the given order."""
        r_idx = self.indices
        c_idx = _column_ids(self.indptr)
        vals = self.data
        nrows, ncols = self.nrows, self.ncols
        if rows is not None:
            rows = np.asarray(rows, dtype=_INDEX)
            rmap = np.full(self.nrows, -1, _INDEX)
            rmap[rows] = np.arange(rows.shape[0], dtype=_INDEX)
            r_idx = rmap[r_idx]
            nrows = rows.shape[0]
        if cols is not None:
            cols = np.asarray(cols, dtype=_INDEX)
            cmap = np.full(self.ncols, -1, _INDEX)
            cmap[cols] = np.arange(cols.shape[0], dtype=_INDEX)
            c_idx = cmap[c_idx]
            ncols = cols.shape[0]
        keep = (r_idx >= 0) & (c_idx >= 0)
        return IntMatrix._canonical(nrows, ncols, r_idx[keep], c_idx[keep], vals[keep])

    @staticmethod
    def block(row_sizes: Sequence[int], col_sizes: Sequence[int],
              blocks: Mapping[tuple[int, int], "IntMatrix"]) -> "IntMatrix":
        """Assemble a block matrix; missing blocks are zero."""
        r_off = np.concatenate(([0], np.cumsum(row_sizes))).astype(int)
        c_off = np.concatenate(([0], np.cumsum(col_sizes))).astype(int)
        rows, cols, vals = [], [], []
        for (bi, bj), m in blocks.items():
            if m.shape != (row_sizes[bi], col_sizes[bj]):
                raise ValueError(f"block {(bi, bj)} has shape {m.shape}, expected "
                                 f"{(row_sizes[bi], col_sizes[bj])}")
            if m.is_zero():
                continue
            rows.append(m.indices + r_off[bi])
            cols.append(_column_ids(m.indptr) + c_off[bj])
            vals.append(m.data)
        nrows, ncols = int(r_off[-1]), int(c_off[-1])
        if not rows:
            return IntMatrix.zeros(nrows, ncols)
        if all(v.dtype == np.int64 for v in vals):
            data = np.concatenate(vals)
        else:
            data = np.concatenate([v.astype(object) for v in vals])
        return IntMatrix._canonical(nrows, ncols, np.concatenate(rows), np.concatenate(cols), data)

    @staticmethod
    def block_diag(mats: Sequence["IntMatrix"]) -> "IntMatrix":
        return IntMatrix.block([m.nrows for m in mats], [m.ncols for m in mats],
                               {(i, i): m for i, m in enumerate(mats)})

    # norms ------------------------------------------------------------

    def column_abs_sums(self) -> list[int]:
        if self.data.dtype == np.int64 and self.nnz * self.max_abs() < _LIMIT:
            return [int(v) for v in self._column_sums_small()]
        out = []
        for j in range(self.ncols):
            out.append(sum(abs(int(v)) for v in self.data[self.indptr[j]:self.indptr[j + 1]]))
        return out

    def l1_norm(self) -> int:
        """Operator norm for the l1 norms on both sides: the largest column sum."""
        if self.is_zero():
            return 0
        if self.data.dtype == np.int64 and self.nnz * self.max_abs() < _LIMIT:
            return int(_max_column_abs_sum(self.indptr, self.data))
        return max(self.column_abs_sums())

    def _column_sums_small(self) -> np.ndarray:
        cs = np.zeros(self.nnz + 1, np.int64)
        np.cumsum(np.abs(self.data), out=cs[1:])
        return cs[self.indptr[1:]] - cs[self.indptr[:-1]]

    def max_abs(self) -> int:
        if self._amax is None:
            self._amax = _max_abs(self.data)
        return self._amax


def l1_norm(matrix: IntMatrix) -> int:
    return matrix.l1_norm()


_ONE_PTR = np.zeros(1, np.int64)
_PADDING: dict = {}


def _padding(ncols: int):
    """Arrays of an all-zero matrix with ``ncols`` columns, shared between calls."""
    pad = _PADDING.get(ncols)
    if pad is None:
        ptr = np.zeros(ncols + 1, np.int64)
        empty = np.zeros(0, np.int64)
        pad = _PADDING.setdefault(ncols, (ptr, empty, empty))
    return pad


def _product_bound(a: IntMatrix, b: IntMatrix) -> float:
    if a.is_zero() or b.is_zero():
        return 0.0
    return float(min(a.nnz, a.nrows * max(a.ncols, 1))) * a.max_abs() * b.max_abs()


def residual_is_zero(shape: tuple[int, int], products: Sequence[tuple[int, IntMatrix, IntMatrix]],
                     terms: Sequence[tuple[int, IntMatrix]] = ()) -> bool:
    """Whether ``sum s A B + sum s C`` vanishes, without forming the products.

    At most two products and two plain terms go through the compiled kernel;
    anything else (or anything that could overflow) is summed exactly.
    """
    nrows, ncols = shape
    bound = 0.0
    small = len(products) <= 2 and len(terms) <= 2
    live_products, live_terms = [], []
    for s, a, b in products:
        if a.nrows != nrows or b.ncols != ncols or a.ncols != b.nrows:
            raise ValueError("product term has the wrong shape")
        if a.data.size and b.data.size:
            live_products.append((s, a, b))
            if a.data.dtype != np.int64 or b.data.dtype != np.int64:
                small = False
            else:
                bound += _product_bound(a, b)
    for s, c in terms:
        if c.nrows != nrows or c.ncols != ncols:
            raise ValueError("term has the wrong shape")
        if c.data.size:
            live_terms.append((s, c))
            if c.data.dtype != np.int64:
                small = False
            else:
                bound += c.max_abs()
    products, terms = live_products, live_terms
    if not (small and bound < 2.0 ** 61):
        total = IntMatrix.zeros(nrows, ncols)
        for s, a, b in products:
            total = total + (a @ b).scale(s)
        for s, c in terms:
            total = total + c.scale(s)
        return total.is_zero()
    ptr, idx, val = _padding(ncols)
    prods = []
    for s, a, b in products:
        prods.extend((a.indptr, a.indices, a.data, b.indptr, b.indices, b.data, int(s)))
    while len(prods) < 14:
        prods.extend((_ONE_PTR, idx, val, ptr, idx, val, 0))
    plain = []
    for s, c in terms:
        plain.extend((c.indptr, c.indices, c.data, int(s)))
    while len(plain) < 8:
        plain.extend((ptr, idx, val, 0))
    return bool(_residual_is_zero(nrows, ncols, *prods, *plain))

