"""Harmonic functions as finite atom sums, and the radial operators on them.

A function is modelled as a finite sum of atoms: explicit zonal terms
(homogeneous harmonic polynomials Z_k(., pole) with a unit pole) and kernel
atoms R_s(., pole).  The operator of order t based at s acts on homogeneous
layers by the coefficient multiplier gamma_k(s+t)/gamma_k(s); on this family
the action is exact at the coefficient level.  Applying it to a kernel atom
with a mismatched base parameter yields a general coefficient-product atom,
evaluated by the same certified truncation machinery as the kernels.

Expansions are immutable after construction; everything here is reentrant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NonConvergent
from .kernel import (
    CoeffProduct,
    eval_coeff_series_grid,
    eval_coeff_series_points,
    gamma_ratio,
)
from .special import check_dimension, zonal

__all__ = [
    "Atom",
    "DiffPair",
    "GeneralSeriesAtom",
    "HarmonicExpansion",
    "KernelAtom",
    "ZonalTerm",
    "apply_D",
    "apply_I",
    "constant",
    "evaluate",
    "evaluate_grid",
    "expansion_from_json",
    "expansion_to_json",
    "homogeneous_coefficient",
]

_POLE_TOL = 1e-9


@dataclass(frozen=True)
class DiffPair:
    """Parameters (s, t) of a radial differential operator of order t."""

    s: float
    t: float


def _as_pole(pole) -> tuple[float, ...]:
    return tuple(float(c) for c in pole)


@dataclass(frozen=True)
class ZonalTerm:
    """weight * Z_k(., pole): a homogeneous harmonic polynomial of degree k."""

    degree: int
    pole: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pole", _as_pole(self.pole))
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if abs(np.linalg.norm(self.pole) - 1.0) > _POLE_TOL:
            raise ValueError("a zonal term's pole must lie on the unit sphere")


@dataclass(frozen=True)
class KernelAtom:
    """weight * R_s(., pole) with |pole| <= 1."""

    s: float
    pole: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pole", _as_pole(self.pole))
        if np.linalg.norm(self.pole) > 1.0 + _POLE_TOL:
            raise ValueError("a kernel atom's pole must lie in the closed ball")


@dataclass(frozen=True)
class GeneralSeriesAtom:
    """weight * sum_k c_k Z_k(., pole) with c_k a product of kernel coefficients.

    Produced by applying an operator to a kernel atom with a mismatched base
    parameter; not part of the serialized input surface unless it occurs.
    """

    coeff: CoeffProduct
    pole: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pole", _as_pole(self.pole))
        if np.linalg.norm(self.pole) > 1.0 + _POLE_TOL:
            raise ValueError("a series atom's pole must lie in the closed ball")


Atom = Union[ZonalTerm, KernelAtom, GeneralSeriesAtom]


@dataclass(frozen=True)
class HarmonicExpansion:
    """A harmonic function on the ball, as an immutable finite sum of atoms."""

    dimension: int
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        check_dimension(self.dimension)
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for atom in self.atoms:
            if len(atom.pole) != self.dimension:
                raise ValueError("atom pole dimension does not match the expansion")

    def scaled(self, c: float) -> "HarmonicExpansion":
        return HarmonicExpansion(
            self.dimension,
            tuple(_replace_weight(a, a.weight * c) for a in self.atoms),
        )

    def __add__(self, other: "HarmonicExpansion") -> "HarmonicExpansion":
        if other.dimension != self.dimension:
            raise ValueError("cannot add expansions of different dimensions")
        return HarmonicExpansion(self.dimension, self.atoms + other.atoms)

    def boundary_kernel_poles(self) -> tuple[tuple[float, ...], ...]:
        """Poles of non-polynomial atoms sitting on the sphere (growth foci)."""
        out = []
        for a in self.atoms:
            if isinstance(a, (KernelAtom, GeneralSeriesAtom)):
                if abs(np.linalg.norm(a.pole) - 1.0) <= _POLE_TOL and a.pole not in out:
                    out.append(a.pole)
        return tuple(out)


def _replace_weight(atom: Atom, weight: float) -> Atom:
    if isinstance(atom, ZonalTerm):
        return ZonalTerm(atom.degree, atom.pole, weight)
    if isinstance(atom, KernelAtom):
        return KernelAtom(atom.s, atom.pole, weight)
    return GeneralSeriesAtom(atom.coeff, atom.pole, weight)


def constant(n: int, value: float = 1.0) -> HarmonicExpansion:
    """The constant function as a degree-0 zonal term."""
    pole = (1.0,) + (0.0,) * (n - 1)
    return HarmonicExpansion(n, (ZonalTerm(0, pole, value),))


def _atom_coeff(atom: Atom) -> CoeffProduct:
    if isinstance(atom, KernelAtom):
        return CoeffProduct.kernel(atom.s)
    if isinstance(atom, GeneralSeriesAtom):
        return atom.coeff
    raise TypeError("zonal terms have no coefficient product")


def evaluate(f: HarmonicExpansion, x, tol: float = 1e-9) -> float:
    """Pointwise value of f, each series atom truncated to tail bound <= tol.

    Requires |x| <= 1; at |x| = 1 every series atom must still satisfy
    |x||pole| < 1, otherwise NonConvergent is raised.
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r > 1.0 + _POLE_TOL:
        raise ValueError("evaluation point must lie in the closed ball")
    total = 0.0
    for atom in f.atoms:
        if isinstance(atom, ZonalTerm):
            total += atom.weight * zonal(f.dimension, atom.degree, x, np.asarray(atom.pole))
        else:
            vals, _, _ = eval_coeff_series_points(
                f.dimension, _atom_coeff(atom), atom.pole, x[None, :], tol_abs=tol
            )
            total += atom.weight * float(vals[0])
    return total


def _zonal_grid(n: int, degree: int, pole, radii: np.ndarray, units: np.ndarray) -> np.ndarray:
    """Z_degree(r u, pole) on a product grid, computed exactly."""
    pole = np.asarray(pole, dtype=float)
    if degree == 0:
        return np.ones((radii.shape[0], units.shape[0]))
    vals = np.array([zonal(n, degree, u, pole) for u in units])
    return (radii**degree)[:, None] * vals[None, :]


def evaluate_grid(
    f: HarmonicExpansion,
    radii: np.ndarray,
    units: np.ndarray,
    *,
    tol_rel: float = 1e-9,
    tol_abs: float = 0.0,
) -> np.ndarray:
    """Values of f on the product grid {r * u}, shape (len(radii), len(units)).

    Series atoms are certified relative to their own majorant mass, so the
    accuracy is relative to the atom's local size rather than absolute.
    """
    radii = np.asarray(radii, dtype=float)
    units = np.asarray(units, dtype=float)
    out = np.zeros((radii.shape[0], units.shape[0]))
    for atom in f.atoms:
        if isinstance(atom, ZonalTerm):
            out += atom.weight * _zonal_grid(f.dimension, atom.degree, atom.pole, radii, units)
        else:
            vals = eval_coeff_series_grid(
                f.dimension,
                _atom_coeff(atom),
                units,
                atom.pole,
                [radii],
                tol_rel=tol_rel,
                tol_abs=tol_abs,
            )[0]
            out += atom.weight * vals
    return out


def apply_D(f: HarmonicExpansion, pair: DiffPair) -> HarmonicExpansion:
    """Image of f under the operator of order pair.t based at pair.s.

    Zonal terms are rescaled by the exact degree multiplier.  A kernel atom
    whose base parameter equals pair.s shifts exactly to a kernel atom at
    s + t; any other series atom picks up the multiplier as extra coefficient
    factors.
    """
    s, t = float(pair.s), float(pair.t)
    atoms: list[Atom] = []
    for atom in f.atoms:
        if isinstance(atom, ZonalTerm):
            ratio = gamma_ratio(f.dimension, s, t, atom.degree)
            atoms.append(ZonalTerm(atom.degree, atom.pole, atom.weight * ratio))
        else:
            coeff = _atom_coeff(atom).shifted(s, t)
            single = coeff.single_kernel_parameter()
            if single is not None:
                atoms.append(KernelAtom(single, atom.pole, atom.weight))
            else:
                atoms.append(GeneralSeriesAtom(coeff, atom.pole, atom.weight))
    return HarmonicExpansion(f.dimension, tuple(atoms))


def apply_I(f: HarmonicExpansion, pair: DiffPair, x, tol: float = 1e-9) -> float:
    """(1-|x|^2)^t * (D f)(x) for the operator with parameters `pair`."""
    x = np.asarray(x, dtype=float)
    r2 = float(np.dot(x, x))
    if r2 >= 1.0:
        raise ValueError("the weighted derivative is evaluated at interior points")
    return (1.0 - r2) ** pair.t * evaluate(apply_D(f, pair), x, tol)


def homogeneous_coefficient(f: HarmonicExpansion, k: int) -> list[tuple[tuple[float, ...], float]]:
    """The degree-k homogeneous layer of f as zonal terms (pole, coefficient).

    A kernel or series atom contributes its coefficient c_k; a zonal term
    contributes its weight when its degree matches.
    """
    if k < 0:
        raise ValueError("degree must be >= 0")
    out: list[tuple[tuple[float, ...], float]] = []
    for atom in f.atoms:
        if isinstance(atom, ZonalTerm):
            if atom.degree == k:
                out.append((atom.pole, atom.weight))
        else:
            log_c = _atom_coeff(atom).log_values(f.dimension, np.array([float(k)]))[0]
            out.append((atom.pole, atom.weight * math.exp(float(log_c))))
    return out


# --- JSON surface -----------------------------------------------------------
#
# {"dimension": n, "atoms": [{"kind": "zonal", "k": ..., "pole": [...], "weight": ...},
#                            {"kind": "kernel", "s": ..., "pole": [...], "weight": ...},
#                            {"kind": "series", "factors": [[alpha, e], ...], ...}]}


def _atom_to_dict(atom: Atom) -> dict:
    if isinstance(atom, ZonalTerm):
        return {"kind": "zonal", "k": atom.degree, "pole": list(atom.pole), "weight": atom.weight}
    if isinstance(atom, KernelAtom):
        return {"kind": "kernel", "s": atom.s, "pole": list(atom.pole), "weight": atom.weight}
    return {
        "kind": "series",
        "factors": [[a, e] for a, e in atom.coeff.factors],
        "pole": list(atom.pole),
        "weight": atom.weight,
    }


def _atom_from_dict(d: dict) -> Atom:
    kind = d["kind"]
    if kind == "zonal":
        return ZonalTerm(int(d["k"]), tuple(d["pole"]), float(d.get("weight", 1.0)))
    if kind == "kernel":
        return KernelAtom(float(d["s"]), tuple(d["pole"]), float(d.get("weight", 1.0)))
    if kind == "series":
        coeff = CoeffProduct(tuple((float(a), int(e)) for a, e in d["factors"]))
        return GeneralSeriesAtom(coeff, tuple(d["pole"]), float(d.get("weight", 1.0)))
    raise ValueError(f"unknown atom kind {kind!r}")


def expansion_to_json(f: HarmonicExpansion) -> str:
    payload = {"dimension": f.dimension, "atoms": [_atom_to_dict(a) for a in f.atoms]}
    return json.dumps(payload, sort_keys=True)


def expansion_from_json(text: str) -> HarmonicExpansion:
    d = json.loads(text)
    return HarmonicExpansion(int(d["dimension"]), tuple(_atom_from_dict(a) for a in d["atoms"]))
