"""Numeric second-order average Hamiltonian from Fourier components.

For an interaction-frame Hamiltonian H(t) = sum_p H_p exp(i p base t) the
first two Magnus terms averaged over the slow period give

    H_ave = H_0 - 1/2 sum_{p != 0} [H_{-p}, H_p] / (p base)
                + sum_{p != 0} [H_0, H_p] / (p base).

Frequencies p may be non-integer (MAS gives p = n k +/- 1 with real k).
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .operators import commutator

KEY_TOL = 1e-9


def _merge(components: Mapping[float, np.ndarray]) -> list[tuple[float, np.ndarray]]:
    """Sum components whose frequencies coincide within KEY_TOL; keeps exact keys."""
    merged: list[list] = []
    for p, h in sorted(components.items(), key=lambda kv: float(kv[0])):
        p = float(p) + 0.0
        h = np.asarray(h, dtype=complex)
        if merged and abs(p - merged[-1][0]) <= KEY_TOL * max(1.0, abs(p)):
            merged[-1][1] = merged[-1][1] + h
        else:
            merged.append([p, h.copy()])
    for item in merged:
        if abs(item[0]) <= KEY_TOL:
            item[0] = 0.0
    return [(p, h) for p, h in merged]


def _partner(merged, p: float):
    for q, h in merged:
        if abs(q + p) <= KEY_TOL * max(1.0, abs(p)):
            return h
    return None


def check_conjugate_symmetry(components: Mapping[float, np.ndarray], rtol: float = 1e-10) -> list[tuple[float, np.ndarray]]:
    """Merge coinciding frequencies and verify H_{-p} = H_p^dag. Returns (p, H_p) pairs."""
    merged = _merge(components)
    for p, h in merged:
        scale = max(1.0, np.linalg.norm(h))
        partner = _partner(merged, p)
        if partner is None:
            if np.linalg.norm(h) > rtol * scale:
                raise ValueError(f"component p={p} has no conjugate partner p={-p}")
            continue
        if np.linalg.norm(partner - h.conj().T) > rtol * scale:
            raise ValueError(f"components p={p} and p={-p} are not Hermitian conjugates")
    return merged


def second_order_average_hamiltonian(components: Mapping[float, np.ndarray], base_freq: float) -> np.ndarray:
    """Average Hamiltonian through second order.

    Parameters
    ----------
    components : mapping p -> H_p
        Fourier components; keys are multiples of ``base_freq``.
    base_freq : float
        Fundamental angular frequency (rad/s), nonzero.
    """
    if base_freq == 0 or not np.isfinite(base_freq):
        raise ValueError("base frequency must be finite and nonzero")
    merged = check_conjugate_symmetry(components)
    if not merged:
        raise ValueError("no components given")
    dim = merged[0][1].shape[0]
    h0 = next((h for p, h in merged if p == 0.0), np.zeros((dim, dim), dtype=complex))
    out = h0.copy()
    for p, hp in merged:
        if p == 0.0:
            continue
        hm = _partner(merged, p)
        w = p * base_freq
        if hm is not None:
            out -= 0.5 * commutator(hm, hp) / w
        out += commutator(h0, hp) / w
    herm_err = np.linalg.norm(out - out.conj().T)
    if herm_err > 1e-10 * max(1.0, np.linalg.norm(out)):
        raise ValueError("average Hamiltonian is not Hermitian; components inconsistent")
    return 0.5 * (out + out.conj().T)


def project_coefficients(h: np.ndarray, basis: Mapping[str, np.ndarray], imag_tol: float = 1e-10) -> dict[str, float]:
    """Coefficients c_Q = Tr(h Q)/Tr(Q^2) on a set of Hermitian operators."""
    out = {}
    scale = max(np.linalg.norm(h), 1e-300)
    for name, q in basis.items():
        c = np.vdot(q.conj().T, h) / np.real(np.vdot(q, q))
        if abs(c.imag) > imag_tol * scale:
            raise ValueError(f"projection on {name} is not real")
        out[name] = float(c.real)
    return out
