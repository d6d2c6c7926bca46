"""Problem definition, the AOINTS v1 text format, and synthetic systems.

Two-electron integrals are stored in chemists' notation: ``g[p, q, r, s]``
is (pq|rs), with p, q on electron 1 and r, s on electron 2. Reading a
physicists'-notation <pr|qs> table into this slot silently produces wrong
energies, so the file format spells the convention out in its ``G`` lines.

Indices are 1-based in files and 0-based in arrays.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

from .linalg import asymmetry, cholesky_spd_check

__all__ = [
    "AointsError",
    "TwoElectronTensor",
    "AoSystem",
    "SpatialSystem",
    "parse_aoints",
    "read_aoints",
    "write_aoints",
    "expand_spatial_to_spin",
    "random_system",
]

DUPLICATE_TOL = 1e-12


class AointsError(ValueError):
    """Malformed or inconsistent AOINTS input; ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def canonical_index(p: int, q: int, r: int, s: int) -> tuple[int, int, int, int]:
    """Representative of the 8-fold permutation class of (pq|rs)."""
    a = (p, q) if p <= q else (q, p)
    b = (r, s) if r <= s else (s, r)
    return a + b if a <= b else b + a


def equivalent_indices(p: int, q: int, r: int, s: int) -> set[tuple[int, int, int, int]]:
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


def _canonical_gather(t: np.ndarray) -> np.ndarray:
    # every slot takes the value stored at its canonical representative
    p, q, r, s = np.indices(t.shape)
    a0, a1 = np.minimum(p, q), np.maximum(p, q)
    b0, b1 = np.minimum(r, s), np.maximum(r, s)
    swap = (a0 > b0) | ((a0 == b0) & (a1 > b1))
    c = (np.where(swap, b0, a0), np.where(swap, b1, a1),
         np.where(swap, a0, b0), np.where(swap, a1, b1))
    return t[c]


def symmetrize_8fold(t: np.ndarray) -> np.ndarray:
    """Average a rank-4 tensor over the real-orbital permutation group.

    Equivalent slots of the result are bitwise equal.
    """
    perms = [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
             (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]
    avg = sum(np.transpose(t, p) for p in perms) / 8.0
    return _canonical_gather(avg)


class TwoElectronTensor:
    """Real two-electron integrals (pq|rs) with 8-fold permutational symmetry.

    Backed by a dense ``(M, M, M, M)`` array in which every symmetry-equivalent
    slot holds the same value, so lookups of any permutation agree exactly.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 4 or len(set(values.shape)) != 1:
            raise ValueError(f"expected an (M, M, M, M) array, got {values.shape}")
        if values.size:
            dev = float(np.max(np.abs(_canonical_gather(values) - values)))
            if dev > DUPLICATE_TOL * max(1.0, float(np.max(np.abs(values)))):
                raise ValueError(f"two-electron tensor lacks 8-fold symmetry (deviation {dev:.3e})")
        self._values = _canonical_gather(values)
        self._values.setflags(write=False)

    @classmethod
    def zeros(cls, order: int) -> "TwoElectronTensor":
        return cls(np.zeros((order,) * 4))

    @classmethod
    def from_unique(cls, order: int, entries: dict[tuple[int, int, int, int], float]):
        """Build from 0-based index quadruples; each value is spread over its class."""
        t = np.zeros((order,) * 4)
        for idx, v in entries.items():
            for e in equivalent_indices(*idx):
                t[e] = v
        return cls(t)

    @property
    def order(self) -> int:
        return self._values.shape[0]

    @property
    def dense(self) -> np.ndarray:
        return self._values

    def __getitem__(self, idx: tuple[int, int, int, int]) -> float:
        return float(self._values[idx])

    def unique_items(self) -> Iterator[tuple[tuple[int, int, int, int], float]]:
        """Canonical (0-based) quadruples with nonzero values, in sorted order."""
        n = self.order
        for p, q in itertools.combinations_with_replacement(range(n), 2):
            for r, s in itertools.combinations_with_replacement(range(n), 2):
                if (p, q) > (r, s):
                    continue
                v = float(self._values[p, q, r, s])
                if v != 0.0:
                    yield (p, q, r, s), v

    def __eq__(self, other) -> bool:
        if not isinstance(other, TwoElectronTensor):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __repr__(self) -> str:
        return f"TwoElectronTensor(order={self.order})"


def _validate(kind: str, n: int, n_electrons: int, S: np.ndarray, h: np.ndarray,
              g: TwoElectronTensor) -> None:
    if n < 1:
        raise ValueError("basis must contain at least one function")
    limit = n if kind == "spinorbital" else 2 * n
    if not 0 <= n_electrons <= limit:
        raise ValueError(f"electron count {n_electrons} outside [0, {limit}]")
    if S.shape != (n, n) or h.shape != (n, n) or g.order != n:
        raise ValueError("integral dimensions do not match the basis size")
    for name, A in (("S", S), ("h", h)):
        dev = asymmetry(A)
        if dev > DUPLICATE_TOL * max(1.0, float(np.max(np.abs(A)))):
            raise ValueError(f"{name} is not symmetric (max |A - A^T| = {dev:.3e})")
    ok, _ = cholesky_spd_check(S)
    if not ok:
        raise ValueError("overlap matrix S is not positive definite")


@dataclass(eq=False)
class AoSystem:
    """Spin-orbital problem statement: metric, core Hamiltonian, (pq|rs), N."""

    metric: np.ndarray
    core_h: np.ndarray
    two_electron: TwoElectronTensor
    n_electrons: int
    energy_shift: float = 0.0
    label: str = ""

    kind = "spinorbital"

    def __post_init__(self):
        self.metric = np.array(self.metric, dtype=float)
        self.core_h = np.array(self.core_h, dtype=float)
        if not isinstance(self.two_electron, TwoElectronTensor):
            self.two_electron = TwoElectronTensor(self.two_electron)
        self.n_electrons = int(self.n_electrons)
        self.energy_shift = float(self.energy_shift)
        _validate(self.kind, self.n_spin_orbitals, self.n_electrons,
                  self.metric, self.core_h, self.two_electron)
        self.metric = 0.5 * (self.metric + self.metric.T)
        self.core_h = 0.5 * (self.core_h + self.core_h.T)

    @property
    def n_spin_orbitals(self) -> int:
        return self.metric.shape[0]

    @property
    def nbasis(self) -> int:
        return self.n_spin_orbitals

    @property
    def g(self) -> np.ndarray:
        return self.two_electron.dense

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return (np.array_equal(self.metric, other.metric)
                and np.array_equal(self.core_h, other.core_h)
                and self.two_electron == other.two_electron
                and self.n_electrons == other.n_electrons
                and self.energy_shift == other.energy_shift
                and self.label == other.label)


@dataclass(eq=False)
class SpatialSystem(AoSystem):
    """Same fields over spatial orbitals; ``n_electrons`` may reach 2m."""

    kind = "spatial"

    @property
    def n_spatial(self) -> int:
        return self.metric.shape[0]


# --------------------------------------------------------------------------
# AOINTS v1


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise AointsError(f"expected an integer, got {tok!r}", lineno) from None


def _parse_float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise AointsError(f"expected a number, got {tok!r}", lineno) from None
    if not np.isfinite(v):
        raise AointsError(f"non-finite value {tok!r}", lineno)
    return v


def parse_aoints(stream: TextIO | str) -> AoSystem | SpatialSystem:
    """Parse an AOINTS v1 document from a text stream or string."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    header: dict[str, object] = {}
    body: list[tuple[int, str, list[str]]] = []
    seen_magic = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_magic:
            if line.split() != ["AOINTS", "v1"]:
                raise AointsError("first line must be 'AOINTS v1'", lineno)
            seen_magic = True
            continue
        tok = line.split()
        key = tok[0]
        if key in ("S", "H", "G"):
            body.append((lineno, key, tok[1:]))
        elif key == "kind":
            if len(tok) != 2 or tok[1] not in ("spinorbital", "spatial"):
                raise AointsError("kind must be 'spinorbital' or 'spatial'", lineno)
            header["kind"] = tok[1]
        elif key == "nbasis":
            if len(tok) != 2:
                raise AointsError("nbasis takes one integer", lineno)
            header["nbasis"] = _parse_int(tok[1], lineno)
        elif key == "nelec":
            if len(tok) != 2:
                raise AointsError("nelec takes one integer", lineno)
            header["nelec"] = _parse_int(tok[1], lineno)
        elif key == "eshift":
            if len(tok) != 2:
                raise AointsError("eshift takes one number", lineno)
            header["eshift"] = _parse_float(tok[1], lineno)
        elif key == "label":
            header["label"] = line[len("label"):].strip()
        else:
            raise AointsError(f"unknown directive {key!r}", lineno)
    if not seen_magic:
        raise AointsError("empty input; expected 'AOINTS v1'")
    for req in ("kind", "nbasis", "nelec"):
        if req not in header:
            raise AointsError(f"missing header directive {req!r}")

    n = int(header["nbasis"])
    if n < 1:
        raise AointsError("nbasis must be positive")
    S = np.zeros((n, n))
    h = np.zeros((n, n))
    S_set = np.zeros((n, n), dtype=bool)
    h_set = np.zeros((n, n), dtype=bool)
    g_entries: dict[tuple[int, int, int, int], float] = {}

    def index(tok: str, lineno: int) -> int:
        i = _parse_int(tok, lineno)
        if not 1 <= i <= n:
            raise AointsError(f"index {i} out of range 1..{n}", lineno)
        return i - 1

    for lineno, key, args in body:
        nidx = 4 if key == "G" else 2
        if len(args) != nidx + 1:
            raise AointsError(f"{key} line needs {nidx} indices and a value", lineno)
        idx = tuple(index(t, lineno) for t in args[:nidx])
        v = _parse_float(args[nidx], lineno)
        if key == "G":
            c = canonical_index(*idx)
            if c in g_entries and abs(g_entries[c] - v) > DUPLICATE_TOL:
                raise AointsError(
                    f"G {' '.join(args[:4])} = {v!r} conflicts with an equivalent "
                    f"entry {g_entries[c]!r}", lineno)
            g_entries[c] = v
            continue
        M, mask = (S, S_set) if key == "S" else (h, h_set)
        i, j = idx
        for a, b in ((i, j), (j, i)):
            if mask[a, b] and abs(M[a, b] - v) > DUPLICATE_TOL:
                raise AointsError(
                    f"{key} {i + 1} {j + 1} = {v!r} conflicts with {key} {a + 1} {b + 1} "
                    f"= {M[a, b]!r}", lineno)
        M[i, j] = M[j, i] = v
        mask[i, j] = mask[j, i] = True

    missing = [i + 1 for i in range(n) if not S_set[i, i]]
    if missing:
        raise AointsError(f"diagonal S entries missing for index {missing}")
    ok, _ = cholesky_spd_check(S)
    if not ok:
        raise AointsError("overlap matrix S is not positive definite")

    cls = SpatialSystem if header["kind"] == "spatial" else AoSystem
    try:
        return cls(
            metric=S,
            core_h=h,
            two_electron=TwoElectronTensor.from_unique(n, g_entries),
            n_electrons=int(header["nelec"]),
            energy_shift=float(header.get("eshift", 0.0)),
            label=str(header.get("label", "")),
        )
    except ValueError as exc:
        raise AointsError(str(exc)) from None


def read_aoints(path) -> AoSystem | SpatialSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_aoints(fh)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_aoints(system: AoSystem) -> str:
    """Canonical AOINTS v1 text: sorted, one line per symmetry-unique nonzero entry."""
    n = system.nbasis
    lines = [
        "AOINTS v1",
        f"kind {system.kind}",
        f"nbasis {n}",
        f"nelec {system.n_electrons}",
        f"eshift {_fmt(system.energy_shift)}",
    ]
    if system.label:
        lines.append(f"label {system.label}")
    S, h = system.metric, system.core_h
    for i in range(n):
        for j in range(i, n):
            if i == j or S[i, j] != 0.0:
                lines.append(f"S {i + 1} {j + 1} {_fmt(S[i, j])}")
    for i in range(n):
        for j in range(i, n):
            if h[i, j] != 0.0:
                lines.append(f"H {i + 1} {j + 1} {_fmt(h[i, j])}")
    for (p, q, r, s), v in system.two_electron.unique_items():
        lines.append(f"G {p + 1} {q + 1} {r + 1} {s + 1} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def expand_spatial_to_spin(sys: SpatialSystem) -> AoSystem:
    """Interleaved spin expansion: spatial a -> spin orbitals 2a (alpha), 2a+1 (beta).

    Integrals vanish between orbitals of different spin on the same electron.
    """
    m = sys.n_spatial
    spin = np.arange(2 * m) % 2
    spatial = np.arange(2 * m) // 2
    same = (spin[:, None] == spin[None, :]).astype(float)
    S = sys.metric[np.ix_(spatial, spatial)] * same
    h = sys.core_h[np.ix_(spatial, spatial)] * same
    g = sys.g[np.ix_(spatial, spatial, spatial, spatial)]
    g = g * same[:, :, None, None] * same[None, None, :, :]
    label = f"{sys.label} (spin-orbital)" if sys.label else ""
    return AoSystem(metric=S, core_h=h, two_electron=TwoElectronTensor(g),
                    n_electrons=sys.n_electrons, energy_shift=sys.energy_shift,
                    label=label)


def random_system(M: int, N: int, seed: int, overlap_strength: float = 0.5,
                  coulomb_scale: float = 0.25) -> AoSystem:
    """Deterministic random spin-orbital system for property testing.

    The metric is ``(1 - s) I + s C`` with C a random correlation matrix, so
    its eigenvalues stay above ``1 - s``. The two-electron tensor is a random
    positive semidefinite pair matrix symmetrized over the 8-fold group.
    """
    if not 0 <= N <= M:
        raise ValueError(f"need 0 <= N <= M, got N={N}, M={M}")
    if not 0.0 <= overlap_strength < 1.0:
        raise ValueError("overlap_strength must lie in [0, 1)")
    rng = np.random.default_rng(seed)

    A = rng.standard_normal((M, M))
    B = A @ A.T
    d = 1.0 / np.sqrt(np.diag(B))
    C = B * d[:, None] * d[None, :]
    S = np.eye(M) + overlap_strength * (C - np.eye(M))
    np.fill_diagonal(S, 1.0)
    S = 0.5 * (S + S.T)

    H = rng.uniform(-1.0, 1.0, (M, M))
    h = 0.5 * (H + H.T)

    L = rng.standard_normal((M * M, M * M))
    pair = (L @ L.T) / (M * M)
    g = symmetrize_8fold(pair.reshape(M, M, M, M)) * coulomb_scale
    return AoSystem(metric=S, core_h=h, two_electron=TwoElectronTensor(g),
                    n_electrons=N, energy_shift=0.0,
                    label=f"random M={M} N={N} seed={seed} overlap={overlap_strength:g}")
