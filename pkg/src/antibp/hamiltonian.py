"""Pauli-sum observables: parsing, fixtures, and dense oracles.

A Hamiltonian is a real-weighted sum of Pauli strings over a fixed qubit
register. Conventions used throughout the package:

* character ``q`` of a Pauli string acts on qubit ``q`` (leftmost = qubit 0),
* qubit 0 is the least significant bit of a statevector index.

The dense-matrix routines are oracles for the fast statevector path and are
limited to small registers where a 2^n x 2^n matrix is affordable.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

PAULI_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

# Largest register for which dense 2^n x 2^n oracles are allowed.
DENSE_QUBIT_LIMIT = 12


@dataclass(frozen=True)
class PauliTerm:
    """One weighted Pauli string, e.g. ``0.5 * XIZ``."""

    coefficient: float
    paulis: str

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise ValueError(f"non-finite coefficient {self.coefficient!r}")
        if not self.paulis:
            raise ValueError("empty Pauli string")
        bad = set(self.paulis) - set("IXYZ")
        if bad:
            raise ValueError(
                f"invalid Pauli character(s) {sorted(bad)} in {self.paulis!r}"
            )


@dataclass(frozen=True)
class Hamiltonian:
    """An ordered, duplicate-free sum of Pauli terms on ``n_qubits`` qubits."""

    n_qubits: int
    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        seen = set()
        for term in self.terms:
            if len(term.paulis) != self.n_qubits:
                raise ValueError(
                    f"term {term.paulis!r} has length {len(term.paulis)}, "
                    f"expected {self.n_qubits}"
                )
            if term.paulis in seen:
                raise ValueError(f"duplicate Pauli string {term.paulis!r}")
            seen.add(term.paulis)

    @property
    def one_norm(self) -> float:
        """Sum of absolute coefficients; a cheap upper bound on the spectrum."""
        return float(sum(abs(t.coefficient) for t in self.terms))


def _merge_terms(raw: list[tuple[float, str]]) -> list[PauliTerm]:
    """Merge repeated Pauli strings by coefficient addition.

    First-occurrence order is kept, and terms whose merged coefficient is
    zero are retained so term indexing stays stable.
    """
    order: list[str] = []
    coeffs: dict[str, float] = {}
    for coeff, paulis in raw:
        if paulis in coeffs:
            coeffs[paulis] += coeff
        else:
            coeffs[paulis] = coeff
            order.append(paulis)
    return [PauliTerm(coeffs[p], p) for p in order]


def hamiltonian_from_pairs(pairs: list[tuple[float, str]]) -> Hamiltonian:
    """Build a normalized Hamiltonian from (coefficient, paulis) pairs."""
    if not pairs:
        raise ValueError("a Hamiltonian needs at least one term")
    lengths = {len(p) for _, p in pairs}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent Pauli string lengths: {sorted(lengths)}")
    terms = _merge_terms(pairs)
    return Hamiltonian(n_qubits=lengths.pop(), terms=tuple(terms))


def parse_hamiltonian(text: str) -> Hamiltonian:
    """Parse the plain-text observable format.

    One term per line, ``<coefficient> <pauli-string>``, whitespace
    separated. ``#`` starts a comment; blank lines are ignored. The
    coefficient may be in decimal or scientific notation. All Pauli strings
    must have the same length, which defines the qubit count.
    """
    pairs: list[tuple[float, str]] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(
                f"line {lineno}: expected '<coefficient> <paulis>', got {raw_line!r}"
            )
        coeff_text, paulis = fields
        try:
            coeff = float(coeff_text)
        except ValueError:
            raise ValueError(
                f"line {lineno}: malformed coefficient {coeff_text!r}"
            ) from None
        if not np.isfinite(coeff):
            raise ValueError(f"line {lineno}: non-finite coefficient {coeff_text!r}")
        bad = set(paulis) - set("IXYZ")
        if bad:
            raise ValueError(
                f"line {lineno}: invalid Pauli character(s) {sorted(bad)}"
            )
        pairs.append((coeff, paulis))
    if not pairs:
        raise ValueError("empty Hamiltonian input")
    lengths = {len(p) for _, p in pairs}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent Pauli string lengths: {sorted(lengths)}")
    return hamiltonian_from_pairs(pairs)


def serialize_hamiltonian(h: Hamiltonian) -> str:
    """Inverse of :func:`parse_hamiltonian`; coefficients keep full precision."""
    lines = [f"{term.coefficient!r} {term.paulis}" for term in h.terms]
    return "\n".join(lines) + "\n"


def load_hamiltonian(path) -> Hamiltonian:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hamiltonian(fh.read())


def save_hamiltonian(h: Hamiltonian, path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        fh.write(serialize_hamiltonian(h))


@functools.lru_cache(maxsize=None)
def _pauli_string_matrix(paulis: str) -> np.ndarray:
    """Dense matrix of a single Pauli string.

    Qubit 0 is the least significant index bit, so its 2x2 factor is the
    last Kronecker factor.
    """
    mat = np.array([[1.0 + 0.0j]])
    for q in reversed(range(len(paulis))):
        mat = np.kron(mat, PAULI_MATRICES[paulis[q]])
    return mat


def dense_matrix(h: Hamiltonian) -> np.ndarray:
    """Full 2^n x 2^n Hermitian matrix of the observable.

    Oracle for the term-wise statevector expectation; only valid up to
    ``DENSE_QUBIT_LIMIT`` qubits.
    """
    if h.n_qubits > DENSE_QUBIT_LIMIT:
        raise ValueError(
            f"dense oracle limited to {DENSE_QUBIT_LIMIT} qubits, "
            f"got {h.n_qubits}"
        )
    dim = 1 << h.n_qubits
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for term in h.terms:
        mat += term.coefficient * _pauli_string_matrix(term.paulis)
    return mat


def exact_ground_energy(h: Hamiltonian) -> float:
    """Smallest eigenvalue of the dense matrix (the reference energy)."""
    return float(np.linalg.eigvalsh(dense_matrix(h))[0])


def tfim(n: int, coupling: float = 1.0, field: float = 1.0) -> Hamiltonian:
    """Open-chain transverse-field Ising model.

    H = -coupling * sum_i Z_i Z_{i+1} - field * sum_i X_i

    An analytically tractable fixture family: small instances are checked
    against hand results, larger ones against the dense eigensolver.
    """
    if n < 1:
        raise ValueError(f"need at least one site, got {n}")
    pairs: list[tuple[float, str]] = []
    for i in range(n - 1):
        chars = ["I"] * n
        chars[i] = "Z"
        chars[i + 1] = "Z"
        pairs.append((-coupling, "".join(chars)))
    for i in range(n):
        chars = ["I"] * n
        chars[i] = "X"
        pairs.append((-field, "".join(chars)))
    return hamiltonian_from_pairs(pairs)
