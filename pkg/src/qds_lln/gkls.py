"""GKLS generators in Lindblad and Kossakowski form.

The Heisenberg-picture generator acts on observables as

    L(x) = sum_k L_k^dagger x L_k + x K + K^dagger x,

with ``sum_k L_k^dagger L_k + K + K^dagger = 0``. The Schrodinger-picture
matrix is the Hilbert-Schmidt adjoint (conjugate transpose) of the
Heisenberg matrix in the column-stacked vec basis.
"""
import enum
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import (
    DimensionError,
    as_hermitian,
    as_square,
    herm_eig,
    unvec,
    vec,
)

__all__ = [
    "Picture",
    "PictureError",
    "ValidationError",
    "Superoperator",
    "LindbladForm",
    "KossakowskiForm",
    "GklsGenerator",
    "ChannelReport",
    "gell_mann_basis",
    "lindblad_superoperator",
    "kossakowski_superoperator",
    "make_lindblad",
    "make_kossakowski",
    "kossakowski_to_lindblad",
    "superoperator",
    "choi_matrix",
    "check_cptp",
    "generator_to_dict",
    "generator_from_dict",
    "dumps_generator",
    "loads_generator",
]

CONSERVATION_TOL = 1e-10
BASIS_TOL = 1e-12
PSD_TOL = 1e-10
DROP_TOL = 1e-12


class ValidationError(ValueError):
    """A generator or basis violates a structural invariant."""


class PictureError(ValueError):
    """A superoperator was given in the wrong picture."""


class Picture(enum.Enum):
    HEISENBERG = "heisenberg"
    SCHRODINGER = "schrodinger"

    @property
    def dual(self):
        if self is Picture.HEISENBERG:
            return Picture.SCHRODINGER
        return Picture.HEISENBERG


@dataclass(frozen=True, eq=False)
class Superoperator:
    """An ``N**2 x N**2`` matrix acting on column-stacked ``N x N`` matrices."""

    matrix: np.ndarray
    picture: Picture
    dim: int = field(init=False)

    def __post_init__(self):
        m = as_square(self.matrix)
        n = int(round(np.sqrt(m.shape[0])))
        if n * n != m.shape[0]:
            raise DimensionError(f"superoperator size {m.shape[0]} is not a square")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dim", n)

    @classmethod
    def identity(cls, dim, picture=Picture.SCHRODINGER):
        return cls(np.eye(dim * dim, dtype=np.complex128), picture)

    def adjoint(self):
        """Hilbert-Schmidt adjoint; switches picture."""
        return Superoperator(self.matrix.conj().T, self.picture.dual)

    def to_picture(self, picture):
        picture = Picture(picture)
        return self if picture is self.picture else self.adjoint()

    def apply(self, x):
        """Act on an ``N x N`` matrix."""
        return unvec(self.matrix @ vec(x))

    def __matmul__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.picture is not self.picture:
            raise PictureError("cannot compose superoperators from different pictures")
        return Superoperator(self.matrix @ other.matrix, self.picture)

    def __repr__(self):
        return f"Superoperator(dim={self.dim}, picture={self.picture.value})"


def gell_mann_basis(n):
    """Generalized Gell-Mann matrices with unit Hilbert-Schmidt norm.

    The first ``n**2 - 1`` elements are traceless (symmetric, antisymmetric,
    then diagonal); the last one is ``I / sqrt(n)``.
    """
    if n < 2:
        raise ValueError(f"Gell-Mann basis requires n >= 2, got {n}")
    sym, asym, diag = [], [], []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=np.complex128)
            s[j, k] = s[k, j] = 1.0
            sym.append(s / np.sqrt(2))
            a = np.zeros((n, n), dtype=np.complex128)
            a[j, k] = -1j
            a[k, j] = 1j
            asym.append(a / np.sqrt(2))
    for l in range(1, n):
        d = np.zeros((n, n), dtype=np.complex128)
        d[np.arange(l), np.arange(l)] = 1.0
        d[l, l] = -l
        diag.append(d / np.sqrt(l * (l + 1)))
    # N=2 ordering comes out as (sigma_x, sigma_y, sigma_z) / sqrt(2)
    return sym + asym + diag + [np.eye(n, dtype=np.complex128) / np.sqrt(n)]


def _validate_basis(basis, n):
    basis = [as_square(a) for a in basis]
    if len(basis) != n * n or any(a.shape != (n, n) for a in basis):
        raise ValidationError(f"basis must hold {n * n} matrices of shape ({n}, {n})")
    stack = np.array(basis)
    gram = np.einsum("aij,bij->ab", stack.conj(), stack)
    if np.max(np.abs(gram - np.eye(n * n))) > BASIS_TOL:
        raise ValidationError("basis is not Hilbert-Schmidt orthonormal")
    if np.max(np.abs(np.trace(stack[:-1], axis1=1, axis2=2)), initial=0.0) > BASIS_TOL:
        raise ValidationError("basis elements 1..N^2-1 must be traceless")
    if np.max(np.abs(stack[-1] - np.eye(n) / np.sqrt(n))) > BASIS_TOL:
        raise ValidationError("last basis element must be I/sqrt(N)")
    return tuple(basis)


def lindblad_superoperator(jump_ops, k_op):
    """Heisenberg matrix of ``x -> sum L^dag x L + x K + K^dag x``.

    No conservation check is done here.
    """
    k_op = as_square(k_op)
    n = k_op.shape[0]
    eye = np.eye(n)
    m = np.kron(k_op.T, eye) + np.kron(eye, k_op.conj().T)
    for op in jump_ops:
        m = m + np.kron(op.T, op.conj().T)
    return m


def kossakowski_superoperator(k, hamiltonian, basis):
    """Heisenberg matrix built term by term from the Kossakowski expression.

    ``L(x) = 1/2 sum_nm k_nm ([a_n^dag, x] a_m + a_n^dag [x, a_m]) - i [x, H]``.
    This deliberately does not go through a Lindblad decomposition, so it
    can serve as the reference for :func:`kossakowski_to_lindblad`.
    """
    n = hamiltonian.shape[0]
    eye = np.eye(n)
    h = np.asarray(hamiltonian)
    m = -1j * (np.kron(h.T, eye) - np.kron(eye, h))
    for i, a_i in enumerate(basis[:-1]):
        ad = a_i.conj().T
        for j, a_j in enumerate(basis[:-1]):
            c = k[i, j]
            if c == 0:
                continue
            # [ad, x] a_j + ad [x, a_j] = 2 ad x a_j - x ad a_j - ad a_j x
            prod = ad @ a_j
            term = 2 * np.kron(a_j.T, ad) - np.kron(prod.T, eye) - np.kron(eye, prod)
            m = m + 0.5 * c * term
    return m


@dataclass(frozen=True, eq=False)
class LindbladForm:
    jump_ops: tuple
    hamiltonian: np.ndarray
    k_op: np.ndarray

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def conservation_residual(self):
        total = self.k_op + self.k_op.conj().T
        for op in self.jump_ops:
            total = total + op.conj().T @ op
        return float(np.linalg.norm(total))


@dataclass(frozen=True, eq=False)
class KossakowskiForm:
    kossakowski: np.ndarray
    hamiltonian: np.ndarray
    basis: tuple

    @property
    def dim(self):
        return self.hamiltonian.shape[0]


class GklsGenerator:
    """A validated GKLS generator with eagerly cached superoperators.

    Use :func:`make_lindblad` or :func:`make_kossakowski` rather than the
    constructor.
    """

    def __init__(self, lindblad, kossakowski=None):
        self.lindblad = lindblad
        self.kossakowski = kossakowski
        heis = lindblad_superoperator(lindblad.jump_ops, lindblad.k_op)
        self._superops = {
            Picture.HEISENBERG: Superoperator(heis, Picture.HEISENBERG),
            Picture.SCHRODINGER: Superoperator(heis.conj().T, Picture.SCHRODINGER),
        }

    @property
    def dim(self):
        return self.lindblad.dim

    def superoperator(self, picture=Picture.HEISENBERG):
        return self._superops[Picture(picture)]

    def __repr__(self):
        form = "kossakowski" if self.kossakowski is not None else "lindblad"
        return f"GklsGenerator(dim={self.dim}, form={form}, jumps={len(self.lindblad.jump_ops)})"


def make_lindblad(jump_ops, hamiltonian):
    """Generator from jump operators and a Hamiltonian.

    ``K = -iH - 1/2 sum L^dag L`` so the conservation constraint holds by
    construction.
    """
    h = as_hermitian(hamiltonian)
    n = h.shape[0]
    ops = tuple(as_square(op) for op in jump_ops)
    for op in ops:
        if op.shape != (n, n):
            raise DimensionError(f"jump operator of shape {op.shape} does not match H ({n}x{n})")
    k_op = -1j * h
    for op in ops:
        k_op = k_op - 0.5 * op.conj().T @ op
    form = LindbladForm(ops, h, k_op)
    if form.conservation_residual() > CONSERVATION_TOL:
        raise ValidationError("conservation constraint violated")
    return GklsGenerator(form)


def _validate_kossakowski(k, n):
    k = as_hermitian(k)
    if k.shape != (n * n - 1, n * n - 1):
        raise DimensionError(f"Kossakowski matrix must be {n * n - 1}x{n * n - 1}, got {k.shape}")
    if np.linalg.eigvalsh(k)[0] < -PSD_TOL:
        raise ValidationError("Kossakowski matrix is not positive semidefinite")
    return k


def make_kossakowski(k, hamiltonian, basis=None):
    """Generator from a PSD Kossakowski matrix in a Hilbert-Schmidt basis.

    ``basis`` defaults to :func:`gell_mann_basis`.
    """
    h = as_hermitian(hamiltonian)
    n = h.shape[0]
    basis = _validate_basis(gell_mann_basis(n) if basis is None else basis, n)
    kf = KossakowskiForm(_validate_kossakowski(k, n), h, basis)
    return GklsGenerator(kossakowski_to_lindblad(kf), kf)


def kossakowski_to_lindblad(kf):
    """Diagonalize ``k`` and turn each positive eigenvalue into a jump operator.

    With ``k = U diag(g) U^dag``, ``L_j = sqrt(g_j) sum_n conj(U_nj) a_n``.
    Eigenvalues in ``(-PSD_TOL, DROP_TOL)`` are dropped.
    """
    gammas, u = herm_eig(kf.kossakowski)
    stack = np.array(kf.basis[:-1])
    jumps = []
    for j, g in enumerate(gammas):
        if g < DROP_TOL:
            continue
        jumps.append(np.sqrt(g) * np.einsum("n,nab->ab", u[:, j].conj(), stack))
    return make_lindblad(jumps, kf.hamiltonian).lindblad


def superoperator(gen, picture=Picture.HEISENBERG):
    return gen.superoperator(picture)


def _choi(schro):
    n = schro.dim
    choi = np.zeros((n * n, n * n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n))
            e[i, j] = 1.0
            choi += np.kron(e, schro.apply(e))
    return choi


def choi_matrix(s):
    """Choi matrix ``sum_ij E_ij (x) S(E_ij)`` of a Schrodinger-picture map.

    Raises :class:`PictureError` for Heisenberg input and ``ValueError`` if
    the map is not Hermiticity-preserving.
    """
    if s.picture is not Picture.SCHRODINGER:
        raise PictureError("choi_matrix needs a Schrodinger-picture map; call .adjoint() first")
    return as_hermitian(_choi(s), rtol=1e-10)


@dataclass(frozen=True)
class ChannelReport:
    cp_ok: bool
    min_choi_eig: float
    constraint_residual: float
    tp_ok: Optional[bool] = None
    unital_ok: Optional[bool] = None

    @property
    def ok(self):
        return self.cp_ok and bool(self.tp_ok if self.tp_ok is not None else self.unital_ok)


def check_cptp(s, tol=1e-9):
    """Complete positivity plus trace preservation (or unitality).

    Schrodinger input is checked for trace preservation, Heisenberg input
    for unitality; the two conditions are dual.
    """
    n = s.dim
    choi = _choi(s.to_picture(Picture.SCHRODINGER))
    herm_residual = np.linalg.norm(choi - choi.conj().T)
    min_eig = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0])
    cp_ok = bool(min_eig >= -tol and herm_residual <= tol * max(1.0, np.linalg.norm(choi)))
    v_id = vec(np.eye(n))
    heis = s.to_picture(Picture.HEISENBERG).matrix
    residual = float(np.linalg.norm(heis @ v_id - v_id))
    if s.picture is Picture.SCHRODINGER:
        return ChannelReport(cp_ok, min_eig, residual, tp_ok=residual <= tol)
    return ChannelReport(cp_ok, min_eig, residual, unital_ok=residual <= tol)


# JSON documents ------------------------------------------------------------

def matrix_to_json(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(data, n=None):
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and arr.shape[-1] == 2:
        # flat row-major list of [re, im] pairs
        side = int(round(np.sqrt(arr.shape[0])))
        if side * side != arr.shape[0]:
            raise ValueError("flat matrix entry list has non-square length")
        arr = arr.reshape(side, side, 2)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix must be nested rows of [re, im] pairs")
    m = arr[..., 0] + 1j * arr[..., 1]
    if n is not None and m.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got {m.shape}")
    return m


_GEN_KEYS = {"dim", "hamiltonian", "jump_ops", "kossakowski"}
_KOSS_KEYS = {"matrix", "basis"}


def generator_to_dict(gen):
    doc = {
        "dim": gen.dim,
        "hamiltonian": matrix_to_json(gen.lindblad.hamiltonian),
        "jump_ops": [matrix_to_json(op) for op in gen.lindblad.jump_ops],
    }
    if gen.kossakowski is not None:
        doc["kossakowski"] = {
            "matrix": matrix_to_json(gen.kossakowski.kossakowski),
            "basis": [matrix_to_json(a) for a in gen.kossakowski.basis],
        }
    return doc


def generator_from_dict(doc):
    """Inverse of :func:`generator_to_dict`.

    The Kossakowski block, when present, wins over ``jump_ops``; its
    ``basis`` may be the string ``"gell-mann"``.
    """
    unknown = set(doc) - _GEN_KEYS
    if unknown:
        raise ValueError(f"unknown generator key(s): {sorted(unknown)}")
    if "dim" not in doc or "hamiltonian" not in doc:
        raise ValueError("generator document needs 'dim' and 'hamiltonian'")
    n = int(doc["dim"])
    h = matrix_from_json(doc["hamiltonian"], n)
    koss = doc.get("kossakowski")
    if koss is not None:
        unknown = set(koss) - _KOSS_KEYS
        if unknown:
            raise ValueError(f"unknown kossakowski key(s): {sorted(unknown)}")
        basis = koss.get("basis", "gell-mann")
        if basis == "gell-mann":
            basis = None
        else:
            basis = [matrix_from_json(a, n) for a in basis]
        k = matrix_from_json(koss["matrix"], n * n - 1)
        return make_kossakowski(k, h, basis)
    jumps = [matrix_from_json(op, n) for op in doc.get("jump_ops", [])]
    return make_lindblad(jumps, h)


def dumps_generator(gen):
    return json.dumps(generator_to_dict(gen), indent=2)


def loads_generator(text):
    return generator_from_dict(json.loads(text))
