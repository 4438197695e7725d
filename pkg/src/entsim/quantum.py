"""Exact linear-algebra oracle for states, measurements, and outcome probabilities.

Everything here is pure and immutable: protocol modules are tested against
these functions, never the other way around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
NORM_TOL = 1e-12

TAU = 2.0 * math.pi


def _as_matrix(obj, dim: int, context: str) -> np.ndarray:
    arr = np.asarray(obj, dtype=complex)
    if arr.shape != (dim, dim):
        raise ValueError(f"{context}: expected a {dim}x{dim} matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PureState:
    """State vector on n qubits; amps holds the 2^n complex amplitudes."""

    n: int
    amps: tuple[complex, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"qubit count must be >= 1, got {self.n}")
        dim = 1 << self.n
        if len(self.amps) != dim:
            raise ValueError(f"state on {self.n} qubits needs {dim} amplitudes, got {len(self.amps)}")
        norm = sum(abs(a) ** 2 for a in self.amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm^2 = {norm!r} deviates from 1 beyond {NORM_TOL}")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.amps, dtype=complex)


@dataclass(frozen=True)
class PovmElement:
    """One measurement operator: Hermitian, positive semidefinite."""

    matrix: np.ndarray
    trace: float = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"measurement operator must be square, got shape {m.shape}")
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValueError(f"operator not Hermitian: max |M - M^dagger| = {dev:.3e}")
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < -PSD_TOL:
            raise ValueError(f"operator not positive semidefinite: min eigenvalue {min_eig:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace", float(np.trace(m).real))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Povm:
    """A complete measurement: elements sum to the identity."""

    elements: tuple[PovmElement, ...]
    n: int

    def __post_init__(self):
        if len(self.elements) < 1:
            raise ValueError("a measurement needs at least one element")
        dim = 1 << self.n
        for i, el in enumerate(self.elements):
            if el.dim != dim:
                raise ValueError(f"element {i}: dimension {el.dim} does not match {dim} (n={self.n})")
        total = sum(el.matrix for el in self.elements)
        dev = np.max(np.abs(total - np.eye(dim)))
        if dev > COMPLETENESS_TOL:
            raise ValueError(f"elements do not sum to identity: max entry deviation {dev:.3e}")

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class PlanarMeasurement:
    """The +-1-valued planar measurement, parameterized by a fraction of a turn."""

    x: float

    def __post_init__(self):
        if not 0.0 <= self.x < 1.0:
            raise ValueError(f"angle parameter must lie in [0, 1), got {self.x!r}")


def r_matrix(x: float) -> np.ndarray:
    """[[cos 2*pi*x, sin 2*pi*x], [sin 2*pi*x, -cos 2*pi*x]]; eigenvalues +-1."""
    c = math.cos(TAU * x)
    s = math.sin(TAU * x)
    return np.array([[c, s], [s, -c]])


def _r_eigenvector(x: float, outcome: int) -> np.ndarray:
    # +1 eigenvector is (cos pi x, sin pi x); -1 eigenvector is orthogonal to it
    c = math.cos(math.pi * x)
    s = math.sin(math.pi * x)
    if outcome == +1:
        return np.array([c, s])
    return np.array([-s, c])


def bell_joint_distribution(x: float, y: float) -> dict[tuple[int, int], float]:
    """Joint outcome law of measuring both halves of (|00>+|11>)/sqrt(2).

    Computed by projecting the state onto the eigenvectors of the two planar
    operators, not from the closed form, so it can serve as an independent
    oracle for Pr[a=b] = cos^2(pi(x-y)).
    """
    phi = np.zeros(4)
    phi[0] = phi[3] = 1.0 / math.sqrt(2.0)
    dist = {}
    for a in (+1, -1):
        va = _r_eigenvector(x, a)
        for b in (+1, -1):
            vb = _r_eigenvector(y, b)
            amp = float(np.kron(va, vb) @ phi)
            dist[(a, b)] = amp * amp
    return dist


def born_probabilities(state: PureState, povm: Povm) -> list[float]:
    """P(l) = <psi|B_l|psi> for each element, clamped to [0, 1]."""
    if state.n != povm.n:
        raise ValueError(f"state is on {state.n} qubits but measurement is on {povm.n}")
    psi = state.vector
    probs = []
    for el in povm.elements:
        p = float((psi.conj() @ (el.matrix @ psi)).real)
        probs.append(min(1.0, max(0.0, p)))
    return probs


def rank1_decompose(povm: Povm) -> tuple[Povm, tuple[int, ...]]:
    """Split each element into rank-1 pieces via eigendecomposition.

    Returns the refined measurement and a relabeling map sending each refined
    outcome back to its source element; coarse-graining refined probabilities
    through the map reproduces the original ones.
    """
    refined = []
    relabel = []
    for l, el in enumerate(povm.elements):
        eigvals, eigvecs = np.linalg.eigh(el.matrix)
        for w, v in zip(eigvals, eigvecs.T):
            if w < 1e-12:
                continue
            refined.append(PovmElement(w * np.outer(v, v.conj())))
            relabel.append(l)
    return Povm(tuple(refined), povm.n), tuple(relabel)


def coarse_grain(probs: list[float], relabel: tuple[int, ...], n_outcomes: int) -> list[float]:
    """Sum refined-outcome probabilities back onto their source outcomes."""
    if len(probs) != len(relabel):
        raise ValueError(f"got {len(probs)} probabilities for {len(relabel)} refined outcomes")
    out = [0.0] * n_outcomes
    for p, l in zip(probs, relabel):
        out[l] += p
    return out


def parse_state(obj) -> PureState:
    """Build a state from the JSON form {"n": int, "amps": [[re, im], ...]}."""
    if not isinstance(obj, dict):
        raise ValueError("state file must hold a JSON object")
    if "n" not in obj or "amps" not in obj:
        raise ValueError('state object needs keys "n" and "amps"')
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise ValueError(f'"n" must be a positive integer, got {n!r}')
    raw = obj["amps"]
    if not isinstance(raw, list) or len(raw) != (1 << n):
        raise ValueError(f'"amps" must list {1 << n} entries for n={n}, got {len(raw) if isinstance(raw, list) else type(raw).__name__}')
    amps = []
    for j, pair in enumerate(raw):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, (int, float)) for v in pair)):
            raise ValueError(f"amps entry {j}: expected [re, im], got {pair!r}")
        amps.append(complex(pair[0], pair[1]))
    return PureState(n, tuple(amps))


def parse_povm(obj) -> Povm:
    """Build a measurement from {"n": int, "elements": [row-major [re, im] grid, ...]}."""
    if not isinstance(obj, dict):
        raise ValueError("measurement file must hold a JSON object")
    if "n" not in obj or "elements" not in obj:
        raise ValueError('measurement object needs keys "n" and "elements"')
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise ValueError(f'"n" must be a positive integer, got {n!r}')
    dim = 1 << n
    raw = obj["elements"]
    if not isinstance(raw, list) or not raw:
        raise ValueError('"elements" must be a nonempty list')
    elements = []
    for l, rows in enumerate(raw):
        if not (isinstance(rows, list) and len(rows) == dim and all(isinstance(r, list) and len(r) == dim for r in rows)):
            raise ValueError(f"element {l}: expected a {dim}x{dim} grid of [re, im] pairs")
        m = np.empty((dim, dim), dtype=complex)
        for i, row in enumerate(rows):
            for j, pair in enumerate(row):
                if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, (int, float)) for v in pair)):
                    raise ValueError(f"element {l}: entry ({i},{j}) must be [re, im], got {pair!r}")
                m[i, j] = complex(pair[0], pair[1])
        try:
            elements.append(PovmElement(m))
        except ValueError as exc:
            raise ValueError(f"element {l}: {exc}") from None
    try:
        return Povm(tuple(elements), n)
    except ValueError as exc:
        raise ValueError(str(exc)) from None


def state_to_json(state: PureState) -> dict:
    return {"n": state.n, "amps": [[a.real, a.imag] for a in state.amps]}


def povm_to_json(povm: Povm) -> dict:
    return {
        "n": povm.n,
        "elements": [[[[v.real, v.imag] for v in row] for row in el.matrix.tolist()] for el in povm.elements],
    }


def random_state(n: int, rng: np.random.Generator) -> PureState:
    """Haar-ish random pure state: normalized complex gaussian vector."""
    dim = 1 << n
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    return PureState(n, tuple(complex(a) for a in vec))


def random_rank1_povm(n: int, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Random rank-1 measurement with the requested number of outcomes.

    Built by drawing random rank-1 operators and conjugating by S^{-1/2} so
    they sum to the identity; outcome count must be >= 2^n.
    """
    dim = 1 << n
    if n_outcomes < dim:
        raise ValueError(f"need at least {dim} rank-1 outcomes to resolve the identity, got {n_outcomes}")
    vecs = rng.normal(size=(n_outcomes, dim)) + 1j * rng.normal(size=(n_outcomes, dim))
    total = sum(np.outer(v, v.conj()) for v in vecs)
    eigvals, eigvecs = np.linalg.eigh(total)
    inv_sqrt = (eigvecs * (1.0 / np.sqrt(eigvals))) @ eigvecs.conj().T
    elements = []
    for v in vecs:
        w = inv_sqrt @ v
        elements.append(PovmElement(np.outer(w, w.conj())))
    return Povm(tuple(elements), n)


def random_povm(n: int, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Random full-rank measurement: random PSD operators normalized to identity."""
    dim = 1 << n
    mats = []
    for _ in range(n_outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        mats.append(g @ g.conj().T)
    total = sum(mats)
    eigvals, eigvecs = np.linalg.eigh(total)
    inv_sqrt = (eigvecs * (1.0 / np.sqrt(eigvals))) @ eigvecs.conj().T
    elements = [PovmElement(inv_sqrt @ m @ inv_sqrt) for m in mats]
    return Povm(tuple(elements), n)


def basis_state(n: int, j: int) -> PureState:
    amps = [0j] * (1 << n)
    amps[j] = 1 + 0j
    return PureState(n, tuple(amps))


def basis_povm(n: int) -> Povm:
    """The computational-basis projective measurement."""
    dim = 1 << n
    els = []
    for j in range(dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[j, j] = 1.0
        els.append(PovmElement(m))
    return Povm(tuple(els), n)
