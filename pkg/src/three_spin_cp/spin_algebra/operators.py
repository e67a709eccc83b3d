"""Product-space spin-1/2 operators and fictitious two-level operators.

Spin 0 is the leftmost Kronecker factor and |alpha> (m = +1/2) is basis
index 0, so for a pair of S spins the product basis reads
|1> = |aa>, |2> = |ab>, |3> = |ba>, |4> = |bb>.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import SpinSystemError
from .system import ABUNDANT, SpinSystem

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

_SINGLE = {
    "x": np.array([[0, 0.5], [0.5, 0]], dtype=complex),
    "y": np.array([[0, -0.5j], [0.5j, 0]], dtype=complex),
    "z": np.array([[0.5, 0], [0, -0.5]], dtype=complex),
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
    "e": np.eye(2, dtype=complex),
    # single-spin ket-bras |a><a|, |b><b|
    "aa": np.array([[1, 0], [0, 0]], dtype=complex),
    "bb": np.array([[0, 0], [0, 1]], dtype=complex),
}
_AXIS_ALIASES = {"−": "-", "p": "+", "m": "-", "plus": "+", "minus": "-"}


def _nspins(system) -> int:
    if isinstance(system, SpinSystem):
        return system.n
    n = int(system)
    if not 1 <= n <= 8:
        raise SpinSystemError(f"spin count {n} outside 1..8")
    return n


def _axis(axis: str) -> str:
    axis = _AXIS_ALIASES.get(axis, axis)
    if axis not in ("x", "y", "z", "+", "-"):
        raise ValueError(f"unknown axis {axis!r}")
    return axis


@lru_cache(maxsize=512)
def _product(n: int, factors: tuple[tuple[int, str], ...]) -> np.ndarray:
    mats = [_SINGLE["e"]] * n
    for k, name in factors:
        mats[k] = _SINGLE[name]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    out.flags.writeable = False
    return out


def embed_operator(system: SpinSystem | int, spin: int, axis: str) -> np.ndarray:
    """Single-spin operator on ``spin`` tensored with identities elsewhere.

    The returned array is read-only and shared; copy before mutating.
    """
    n = _nspins(system)
    if not 0 <= spin < n:
        raise SpinSystemError(f"spin index {spin} out of range for {n} spins")
    return _product(n, ((int(spin), _axis(axis)),))


def identity(system: SpinSystem | int) -> np.ndarray:
    n = _nspins(system)
    return np.eye(2 ** n, dtype=complex)


def _check_pair(system, s_pair) -> tuple[int, int]:
    n = _nspins(system)
    s1, s2 = (int(x) for x in s_pair)
    if s1 == s2:
        raise SpinSystemError("fictitious operators need two distinct S spins")
    for s in (s1, s2):
        if not 0 <= s < n:
            raise SpinSystemError(f"spin index {s} out of range")
        if isinstance(system, SpinSystem) and system.spins[s].species != ABUNDANT:
            raise SpinSystemError(f"spin {system.labels[s]!r} is not an abundant S spin")
    return s1, s2


# single-spin ket-bra |u><v| by spin states 'a' (alpha) / 'b' (beta)
_KETBRA = {("a", "a"): "aa", ("b", "b"): "bb", ("a", "b"): "+", ("b", "a"): "-"}
_SUBSPACES = {"2-3": ("ab", "ba"), "1-4": ("aa", "bb")}


def _transition(n, s1, s2, ket: str, bra: str) -> np.ndarray:
    return _product(n, ((s1, _KETBRA[ket[0], bra[0]]), (s2, _KETBRA[ket[1], bra[1]])))


def fictitious_operator(system: SpinSystem | int, s_pair, subspace: str, axis: str) -> np.ndarray:
    """Fictitious spin-1/2 operator of the ``"2-3"`` or ``"1-4"`` S-pair subspace.

    ``axis`` is one of x, y, z, +, - or ``unit`` (the subspace projector).
    """
    n = _nspins(system)
    s1, s2 = _check_pair(system, s_pair)
    try:
        up, dn = _SUBSPACES[subspace]
    except KeyError:
        raise ValueError(f"subspace must be '2-3' or '1-4', got {subspace!r}") from None
    uu = _transition(n, s1, s2, up, up)
    dd = _transition(n, s1, s2, dn, dn)
    ud = _transition(n, s1, s2, up, dn)
    du = _transition(n, s1, s2, dn, up)
    if axis == "unit":
        out = uu + dd
    else:
        axis = _axis(axis)
        out = {
            "z": 0.5 * (uu - dd),
            "x": 0.5 * (ud + du),
            "y": -0.5j * (ud - du),
            "+": ud.copy(),
            "-": du.copy(),
        }[axis]
    out.flags.writeable = False
    return out


def zq_dq_operator(system: SpinSystem | int, s_pair, i_spin: int, kind: str) -> np.ndarray:
    """Zero/double-quantum operators between spin I and the 2-3 fictitious spin.

    With primes marking 2-3 subspace operators,
    ZQx = (I+ S-' + I- S+')/2, ZQy = (I+ S-' - I- S+')/(2i),
    DQx = (I+ S+' + I- S-')/2, DQy = (I+ S+' - I- S-')/(2i).
    """
    n = _nspins(system)
    s1, s2 = _check_pair(system, s_pair)
    i_spin = int(i_spin)
    if i_spin in (s1, s2):
        raise SpinSystemError("I spin overlaps the S pair")
    if isinstance(system, SpinSystem) and system.spins[i_spin].species == ABUNDANT:
        raise SpinSystemError(f"spin {system.labels[i_spin]!r} is not the rare I spin")
    ip, im = embed_operator(n, i_spin, "+"), embed_operator(n, i_spin, "-")
    sp = fictitious_operator(n, (s1, s2), "2-3", "+")
    sm = fictitious_operator(n, (s1, s2), "2-3", "-")
    if kind in ("ZQx", "ZQy"):
        a, b = ip @ sm, im @ sp
    elif kind in ("DQx", "DQy"):
        a, b = ip @ sp, im @ sm
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return 0.5 * (a + b) if kind.endswith("x") else -0.5j * (a - b)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.linalg.norm(a - a.conj().T) <= tol * max(1.0, np.linalg.norm(a)))


def unitarity_error(u: np.ndarray) -> float:
    """Frobenius norm of U^dag U - 1 (stacked input gives the maximum)."""
    u = np.asarray(u)
    if u.ndim == 2:
        u = u[None]
    g = np.einsum("kba,kbc->kac", u.conj(), u)
    g -= np.eye(u.shape[-1])
    return float(np.max(np.linalg.norm(g, axis=(1, 2)))) if len(u) else 0.0


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return unitarity_error(u) <= tol


def amplitude(rho: np.ndarray, q: np.ndarray) -> float:
    """Reported amplitude a_Q = Tr(rho Q) / Tr(Q^2)."""
    return float(np.real(np.vdot(q.conj().T, rho)) / np.real(np.vdot(q, q)))


def deviation_state(system: SpinSystem | int, terms) -> np.ndarray:
    """Build rho0 = sum p_i Q_i from ``(p, Q)`` pairs and check it is a valid deviation."""
    n = _nspins(system)
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for p, q in terms:
        rho = rho + p * np.asarray(q)
    check_deviation(rho)
    return rho


def check_deviation(rho: np.ndarray) -> None:
    """Raise ValueError unless rho is traceless and Hermitian."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] & (rho.shape[0] - 1):
        raise ValueError("deviation operator must be square with power-of-two dimension")
    nrm = np.linalg.norm(rho)
    if abs(np.trace(rho)) > 1e-12 * max(nrm, 1e-300):
        raise ValueError("deviation operator must be traceless")
    if not is_hermitian(rho):
        raise ValueError("deviation operator must be Hermitian")
