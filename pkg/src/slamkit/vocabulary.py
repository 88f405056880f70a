"""Hierarchical bag-of-words vocabulary for binary and float descriptors.

The word tree is built by recursive k-means (k-majority voting on Hamming
distance for binary descriptors, Lloyd iterations with greedy seeding for
float ones) and stored in flat parallel arrays.  The on-disk form is one
contiguous little-endian blob (header plus flat node records, see
docs/formats.md); loading maps every node array as a view into a single
buffer, so a loaded vocabulary costs one allocation regardless of size.

Image signatures are tf-idf weighted, L1-normalized sparse vectors scored
with ``s(a, b) = 1 - 0.5 * |a - b|_1``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SlamkitError

DESC_BINARY = "binary"
DESC_FLOAT = "float32"

_MAGIC = b"GBOW"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIBxxxIII")  # magic, version, k, levels, type, len, nodes, words
_HEADER_SIZE = 64


class VocabularyError(SlamkitError):
    pass


@dataclass
class BowVector:
    """Sparse word-id -> weight map with unit L1 norm when nonempty."""

    weights: dict[int, float] = field(default_factory=dict)

    def l1_norm(self) -> float:
        return float(sum(abs(w) for w in self.weights.values()))

    def __len__(self):
        return len(self.weights)


@dataclass
class FeatureVector:
    """Feature indices grouped by their ancestor node at a fixed level."""

    groups: dict[int, list[int]] = field(default_factory=dict)

    def __len__(self):
        return len(self.groups)


def score(a: BowVector, b: BowVector) -> float:
    """L1 similarity in [0, 1]; 1 for identical distributions."""
    na, nb = a.l1_norm(), b.l1_norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    total = 0.0
    for w, va in a.weights.items():
        vb = b.weights.get(w)
        if vb is not None:
            va, vb = va / na, vb / nb
            total += abs(va - vb) - abs(va) - abs(vb)
    return -0.5 * total


def _pad8(n: int) -> int:
    return (n + 7) & ~7


def _as_matrix(descriptors, desc_type=None):
    d = np.asarray(descriptors)
    if d.ndim != 2:
        raise VocabularyError(f"descriptors must be 2-D, got shape {d.shape}")
    if desc_type is None:
        desc_type = DESC_BINARY if d.dtype == np.uint8 else DESC_FLOAT
    if desc_type == DESC_BINARY:
        if d.dtype != np.uint8:
            raise VocabularyError(
                f"binary vocabulary expects uint8 descriptors, got {d.dtype}")
        return np.ascontiguousarray(d), DESC_BINARY
    if not np.issubdtype(d.dtype, np.floating):
        raise VocabularyError(
            f"float vocabulary expects floating descriptors, got {d.dtype}")
    return np.ascontiguousarray(d, dtype=np.float32), DESC_FLOAT


def _hamming_to_centers(block: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances, (N, M) from (N, D) x (M, D) uint8."""
    if block.shape[1] % 8 == 0:
        a = block.view(np.uint64)
        b = centers.view(np.uint64) if centers.flags.c_contiguous else \
            np.ascontiguousarray(centers).view(np.uint64)
    else:
        a, b = block, centers
    x = np.bitwise_xor(a[:, None, :], b[None, :, :])
    return np.bitwise_count(x).sum(axis=2, dtype=np.int64)


def _l2_to_centers(block: np.ndarray, centers: np.ndarray) -> np.ndarray:
    a = block.astype(np.float64)
    b = centers.astype(np.float64)
    d = (np.sum(a * a, axis=1)[:, None] - 2.0 * a @ b.T
         + np.sum(b * b, axis=1)[None, :])
    return np.maximum(d, 0.0)  # expanded form can go slightly negative


def _distances(block, centers, desc_type):
    if desc_type == DESC_BINARY:
        return _hamming_to_centers(block, centers)
    return _l2_to_centers(block, centers)


def _seed_centers(data, k, rng, desc_type):
    """Greedy farthest-biased seeding (kmeans++ style) on the native metric."""
    first = int(rng.integers(len(data)))
    chosen = [first]
    dist = _distances(data, data[first:first + 1], desc_type)[:, 0].astype(np.float64)
    for _ in range(1, k):
        total = float(dist.sum())
        if total <= 0.0:
            break
        probs = dist / total
        nxt = int(rng.choice(len(data), p=probs))
        chosen.append(nxt)
        nd = _distances(data, data[nxt:nxt + 1], desc_type)[:, 0].astype(np.float64)
        dist = np.minimum(dist, nd)
    return data[chosen]


def _kmeans(data, k, rng, desc_type, max_iters=25):
    """Cluster rows of ``data``; returns (centers, labels) without empty groups."""
    centers = _seed_centers(data, k, rng, desc_type)
    labels = np.zeros(len(data), dtype=np.int64)
    for _ in range(max_iters):
        new_labels = np.argmin(_distances(data, centers, desc_type), axis=1)
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        fresh = []
        for c in range(len(centers)):
            members = data[labels == c]
            if not len(members):
                continue
            if desc_type == DESC_BINARY:
                bits = np.unpackbits(members, axis=1)
                maj = (bits.sum(axis=0) * 2 > len(members)).astype(np.uint8)
                fresh.append(np.packbits(maj))
            else:
                fresh.append(members.mean(axis=0).astype(np.float32))
        centers = np.stack(fresh)
        if len(centers) == 1:
            break
    labels = np.argmin(_distances(data, centers, desc_type), axis=1)
    keep = np.unique(labels)
    centers = centers[keep]
    remap = {int(c): i for i, c in enumerate(keep)}
    labels = np.array([remap[int(l)] for l in labels], dtype=np.int64)
    return centers, labels


class Vocabulary:
    """Flat-array word tree; immutable once built or loaded."""

    def __init__(self, k, levels, desc_type, desc_len, parent, children,
                 word_id, weight, centers):
        self.k = int(k)
        self.levels = int(levels)
        self.desc_type = desc_type
        self.desc_len = int(desc_len)
        self.parent = parent
        self.children = children
        self.word_id = word_id
        self.weight = weight
        self.centers = centers

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def num_words(self) -> int:
        return int(np.sum(self.word_id >= 0))

    def storage_blocks(self) -> int:
        """Number of distinct backing buffers holding node data."""
        bases = set()
        for arr in (self.parent, self.children, self.word_id, self.weight,
                    self.centers):
            base = arr
            while getattr(base, "base", None) is not None:
                base = base.base
            bases.add(id(base))
        return len(bases)

    # -- descent ---------------------------------------------------------

    def _check(self, d: np.ndarray):
        want = np.uint8 if self.desc_type == DESC_BINARY else np.float32
        if d.dtype != want or d.shape[1] != self.desc_len:
            raise VocabularyError(
                f"descriptor type/length mismatch: vocabulary holds "
                f"{self.desc_type}[{self.desc_len}], got {d.dtype}[{d.shape[1]}]")

    def _descend(self, d: np.ndarray, feature_level: int):
        """Vectorized root-to-leaf walk; returns (leaf nodes, anchor nodes)."""
        n = len(d)
        cur = np.zeros(n, dtype=np.int64)
        anchor = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        level = 0
        while len(active):
            ch = self.children[cur[active]]          # (A, k)
            leaf_mask = ch[:, 0] < 0
            active = active[~leaf_mask]
            if not len(active):
                break
            ch = ch[~leaf_mask]
            centers = self.centers[ch.ravel()].reshape(ch.shape + (self.desc_len,))
            block = d[active]
            if self.desc_type == DESC_BINARY:
                if self.desc_len % 8 == 0:
                    x = np.bitwise_xor(block.view(np.uint64)[:, None, :],
                                       centers.view(np.uint64))
                else:
                    x = np.bitwise_xor(block[:, None, :], centers)
                dist = np.bitwise_count(x).sum(axis=2, dtype=np.int64)
                dist = np.where(ch >= 0, dist, np.iinfo(np.int64).max)
            else:
                diff = block[:, None, :].astype(np.float64) - centers
                dist = np.sum(diff * diff, axis=2)
                dist = np.where(ch >= 0, dist, np.inf)
            pick = ch[np.arange(len(active)), np.argmin(dist, axis=1)]
            cur[active] = pick
            level += 1
            if level <= feature_level:
                anchor[active] = pick
        return cur, anchor

    def transform(self, descriptors, feature_level: int = 2):
        """Descriptor set to (BowVector, FeatureVector)."""
        d, dtype = _as_matrix(descriptors, self.desc_type)
        if len(d) == 0:
            return BowVector(), FeatureVector()
        self._check(d)
        leaves, anchors = self._descend(d, feature_level)
        words = self.word_id[leaves]
        bow: dict[int, float] = {}
        leaf_of_word: dict[int, int] = {}
        for node, w in zip(leaves, words):
            bow[int(w)] = bow.get(int(w), 0.0) + 1.0
            leaf_of_word[int(w)] = int(node)
        # tf * idf, then L1-normalize
        for w in list(bow):
            bow[w] *= float(self.weight[leaf_of_word[w]])
        total = sum(bow.values())
        if total > 0:
            bow = {w: v / total for w, v in bow.items()}
        else:
            bow = {}
        fv: dict[int, list[int]] = {}
        for idx, node in enumerate(anchors):
            fv.setdefault(int(node), []).append(idx)
        return BowVector(bow), FeatureVector(fv)

    def transform_scalar(self, descriptors, feature_level: int = 2):
        """Pure-Python reference descent (used to validate the fast path)."""
        d, _ = _as_matrix(descriptors, self.desc_type)
        if len(d) == 0:
            return BowVector(), FeatureVector()
        self._check(d)
        bow: dict[int, float] = {}
        fv: dict[int, list[int]] = {}
        leaf_weight: dict[int, float] = {}
        for idx in range(len(d)):
            row = d[idx]
            node = 0
            level = 0
            anchor = 0
            while self.children[node, 0] >= 0:
                best, best_dist = -1, None
                for c in self.children[node]:
                    if c < 0:
                        break
                    if self.desc_type == DESC_BINARY:
                        dist = sum(int(v).bit_count()
                                   for v in np.bitwise_xor(row, self.centers[c]))
                    else:
                        diff = row.astype(np.float64) - self.centers[c].astype(np.float64)
                        dist = float(diff @ diff)
                    if best_dist is None or dist < best_dist:
                        best, best_dist = int(c), dist
                node = best
                level += 1
                if level <= feature_level:
                    anchor = node
            w = int(self.word_id[node])
            bow[w] = bow.get(w, 0.0) + 1.0
            leaf_weight[w] = float(self.weight[node])
            fv.setdefault(anchor, []).append(idx)
        for w in list(bow):
            bow[w] *= leaf_weight[w]
        total = sum(bow.values())
        bow = {w: v / total for w, v in bow.items()} if total > 0 else {}
        return BowVector(bow), FeatureVector(fv)

    # -- serialization -----------------------------------------------------

    def save(self, path: str):
        n = self.num_nodes
        header = _HEADER.pack(_MAGIC, _VERSION, self.k, self.levels,
                              0 if self.desc_type == DESC_BINARY else 1,
                              self.desc_len, n, self.num_words)
        header = header.ljust(_HEADER_SIZE, b"\0")
        with open(path, "wb") as fh:
            fh.write(header)
            for arr in (np.ascontiguousarray(self.parent, dtype="<i4"),
                        np.ascontiguousarray(self.children, dtype="<i4"),
                        np.ascontiguousarray(self.word_id, dtype="<i4"),
                        np.ascontiguousarray(self.weight, dtype="<f8")):
                raw = arr.tobytes()
                fh.write(raw)
                fh.write(b"\0" * (_pad8(len(raw)) - len(raw)))
            raw = np.ascontiguousarray(self.centers).tobytes()
            fh.write(raw)
            fh.write(b"\0" * (_pad8(len(raw)) - len(raw)))

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < _HEADER_SIZE:
            raise VocabularyError(f"{path}: truncated header")
        magic, version, k, levels, dtype_tag, desc_len, n, _words = \
            _HEADER.unpack(blob[:_HEADER.size])
        if magic != _MAGIC:
            raise VocabularyError(f"{path}: bad magic {magic!r}")
        if version != _VERSION:
            raise VocabularyError(f"{path}: unsupported version {version}")
        desc_type = DESC_BINARY if dtype_tag == 0 else DESC_FLOAT
        expected = cls.file_size(n, k, desc_type, desc_len)
        if len(blob) != expected:
            raise VocabularyError(
                f"{path}: expected {expected} bytes for {n} nodes, got {len(blob)}")
        off = _HEADER_SIZE
        def view(dtype, count, itemsize):
            nonlocal off
            arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
            off += _pad8(count * itemsize)
            return arr
        parent = view("<i4", n, 4)
        children = view("<i4", n * k, 4).reshape(n, k)
        word_id = view("<i4", n, 4)
        weight = view("<f8", n, 8)
        if desc_type == DESC_BINARY:
            centers = view("u1", n * desc_len, 1).reshape(n, desc_len)
        else:
            centers = view("<f4", n * desc_len, 4).reshape(n, desc_len)
        return cls(k, levels, desc_type, desc_len, parent, children, word_id,
                   weight, centers)

    @staticmethod
    def file_size(n: int, k: int, desc_type: str, desc_len: int) -> int:
        """Exact byte size of the on-disk form."""
        center_bytes = n * desc_len * (1 if desc_type == DESC_BINARY else 4)
        return (_HEADER_SIZE + _pad8(4 * n) + _pad8(4 * n * k) + _pad8(4 * n)
                + _pad8(8 * n) + _pad8(center_bytes))


def train(images, k: int = 10, levels: int = 4, seed: int = 0) -> Vocabulary:
    """Build a vocabulary from per-image descriptor arrays.

    ``images`` is a sequence of (Ni, D) arrays (one per training image) or
    a single array treated as one image.  Deterministic for a fixed seed.
    """
    if isinstance(images, np.ndarray):
        images = [images]
    if k < 2:
        raise VocabularyError("branching factor must be >= 2")
    if not 1 <= levels <= 10:
        raise VocabularyError("levels must be in 1..10")
    mats = []
    desc_type = None
    for img in images:
        m, t = _as_matrix(img, desc_type)
        if desc_type is None:
            desc_type = t
        mats.append(m)
    if not mats or not sum(len(m) for m in mats):
        raise VocabularyError("no training descriptors")
    data = np.vstack(mats)
    if len(data) < k:
        raise VocabularyError(f"need at least k={k} descriptors, got {len(data)}")
    desc_len = data.shape[1]

    rng = np.random.default_rng(seed)
    parent = [-1]
    children: list[np.ndarray] = [np.full(k, -1, dtype=np.int32)]
    centers = [np.zeros(desc_len, dtype=data.dtype)]
    word_id = [-1]

    def grow(node: int, rows: np.ndarray, level: int):
        if level == levels or len(rows) < k or len(np.unique(rows, axis=0)) < 2:
            return
        ctrs, labels = _kmeans(rows, k, rng, desc_type)
        if len(ctrs) < 2:
            return
        kids = []
        for c in range(len(ctrs)):
            child = len(parent)
            parent.append(node)
            children.append(np.full(k, -1, dtype=np.int32))
            centers.append(ctrs[c])
            word_id.append(-1)
            kids.append(child)
        children[node][:len(kids)] = kids
        for c, child in enumerate(kids):
            grow(child, rows[labels == c], level + 1)

    grow(0, data, 0)

    next_word = 0
    for node in range(len(parent)):
        if children[node][0] < 0:
            word_id[node] = next_word
            next_word += 1

    voc = Vocabulary(k, levels, desc_type, desc_len,
                     np.asarray(parent, dtype=np.int32),
                     np.stack(children),
                     np.asarray(word_id, dtype=np.int32),
                     np.zeros(len(parent)),
                     np.stack(centers))

    # idf over the training images: ln(N / n_w)
    n_images = len(mats)
    counts = np.zeros(voc.num_nodes, dtype=np.int64)
    for m in mats:
        if not len(m):
            continue
        leaves, _ = voc._descend(m, 0)
        counts[np.unique(leaves)] += 1
    weights = np.zeros(voc.num_nodes)
    leaf_mask = voc.word_id >= 0
    present = leaf_mask & (counts > 0)
    weights[present] = np.log(n_images / counts[present])
    voc.weight = weights
    return voc
