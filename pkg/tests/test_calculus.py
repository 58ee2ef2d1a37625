import json
import math

import numpy as np
import pytest

from hball.calculus import (
    DiffPair,
    GeneralSeriesAtom,
    HarmonicExpansion,
    KernelAtom,
    ZonalTerm,
    apply_D,
    apply_I,
    constant,
    evaluate,
    evaluate_grid,
    expansion_from_json,
    expansion_to_json,
    homogeneous_coefficient,
)
from hball.kernel import gamma_ratio
from hball.special import dim_spherical_harmonics


def gamma_product_oracle(n, alpha, k):
    out = 1.0
    if alpha > -(1 + n / 2):
        for j in range(k):
            out *= (1 + n / 2 + alpha + j) / (n / 2 + j)
        return out
    for j in range(k):
        out *= (1.0 + j) ** 2 / ((1 - (n / 2 + alpha) + j) * (n / 2 + j))
    return out


ZETA2 = (1.0, 0.0)
ZETA3 = (0.0, 0.0, 1.0)


class TestConstruction:
    def test_zonal_pole_must_be_on_sphere(self):
        with pytest.raises(ValueError):
            ZonalTerm(2, (0.5, 0.0))

    def test_kernel_pole_must_be_in_ball(self):
        with pytest.raises(ValueError):
            KernelAtom(0.0, (1.2, 0.0))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            HarmonicExpansion(3, (ZonalTerm(1, ZETA2),))

    def test_boundary_pole_listing(self):
        f = HarmonicExpansion(
            2, (KernelAtom(0.0, ZETA2), KernelAtom(0.0, (0.5, 0.0)), ZonalTerm(1, (0.0, 1.0)))
        )
        assert f.boundary_kernel_poles() == (ZETA2,)


class TestEvaluate:
    def test_constant_everywhere(self):
        f = constant(3, 2.5)
        for x in ([0.0, 0.0, 0.0], [0.3, -0.2, 0.5], [0.0, 0.0, 1.0]):
            assert evaluate(f, x) == pytest.approx(2.5, rel=1e-14)

    def test_kernel_atom_with_central_pole_is_one(self):
        f = HarmonicExpansion(2, (KernelAtom(-1.7, (0.0, 0.0)),))
        assert evaluate(f, [0.6, -0.3]) == pytest.approx(1.0, rel=1e-12)

    def test_kernel_atom_series_oracle_on_pole_ray(self):
        r = 0.65
        f = HarmonicExpansion(2, (KernelAtom(0.0, ZETA2),))
        oracle = sum(
            gamma_product_oracle(2, 0.0, k) * dim_spherical_harmonics(2, k) * r**k
            for k in range(400)
        )
        assert evaluate(f, [r, 0.0], tol=1e-11) == pytest.approx(oracle, abs=1e-9)

    def test_outside_ball_rejected(self):
        with pytest.raises(ValueError):
            evaluate(constant(2), [1.2, 0.0])

    def test_grid_matches_pointwise(self):
        f = HarmonicExpansion(
            3, (KernelAtom(0.4, ZETA3, 1.2), ZonalTerm(2, (1.0, 0.0, 0.0), -0.5))
        )
        radii = np.array([0.2, 0.7])
        units = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])
        grid = evaluate_grid(f, radii, units, tol_rel=1e-10)
        for i, r in enumerate(radii):
            for j, u in enumerate(units):
                assert grid[i, j] == pytest.approx(
                    evaluate(f, r * u, tol=1e-12), abs=1e-8
                )


class TestApplyD:
    def test_order_zero_is_identity(self):
        f = HarmonicExpansion(2, (KernelAtom(0.7, ZETA2), ZonalTerm(3, (0.0, 1.0), 2.0)))
        assert apply_D(f, DiffPair(-1.3, 0.0)) == f

    def test_kernel_shift_is_exact(self):
        f = HarmonicExpansion(3, (KernelAtom(0.25, ZETA3, 1.5),))
        g = apply_D(f, DiffPair(0.25, 1.25))
        assert g.atoms == (KernelAtom(1.5, ZETA3, 1.5),)

    def test_mismatched_base_gives_series_atom(self):
        f = HarmonicExpansion(3, (KernelAtom(0.25, ZETA3),))
        g = apply_D(f, DiffPair(1.0, 0.5))
        assert isinstance(g.atoms[0], GeneralSeriesAtom)

    def test_zonal_rescaled_by_degree_multiplier(self):
        f = HarmonicExpansion(2, (ZonalTerm(3, ZETA2, 2.0),))
        g = apply_D(f, DiffPair(0.5, 1.5))
        assert g.atoms[0].weight == pytest.approx(
            2.0 * gamma_ratio(2, 0.5, 1.5, 3), rel=1e-14
        )

    def test_two_sided_inverse_on_layers(self):
        rng = np.random.default_rng(7)
        f = HarmonicExpansion(
            3, (KernelAtom(-2.1, ZETA3, 1.3), ZonalTerm(2, (1.0, 0.0, 0.0), -0.4))
        )
        for _ in range(8):
            s, t = rng.uniform(-3, 3, 2)
            g = apply_D(apply_D(f, DiffPair(s, t)), DiffPair(s + t, -t))
            h = apply_D(apply_D(f, DiffPair(s + t, -t)), DiffPair(s, t))
            for k in (0, 1, 7, 50, 200):
                base = homogeneous_coefficient(f, k)
                for other in (homogeneous_coefficient(g, k), homogeneous_coefficient(h, k)):
                    for (p0, c0), (p1, c1) in zip(base, other):
                        assert p0 == p1
                        assert c1 == pytest.approx(c0, rel=1e-12, abs=1e-300)

    def test_linearity_at_evaluation_points(self):
        f = HarmonicExpansion(2, (KernelAtom(0.3, ZETA2),))
        g = HarmonicExpansion(2, (ZonalTerm(2, (0.0, 1.0)),))
        a, b = 1.7, -0.6
        combo = f.scaled(a) + g.scaled(b)
        pair = DiffPair(-0.8, 1.4)
        for x in ([0.3, 0.2], [-0.5, 0.1]):
            lhs = evaluate(apply_D(combo, pair), x, tol=1e-12)
            rhs = a * evaluate(apply_D(f, pair), x, tol=1e-12) + b * evaluate(
                apply_D(g, pair), x, tol=1e-12
            )
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_bounded_amplification_on_half_ball(self):
        # |D f| on |x| <= 1/2 is controlled by the degree-multiplier majorant
        f = HarmonicExpansion(2, (KernelAtom(0.4, ZETA2, 0.8), ZonalTerm(2, (0.0, 1.0), 1.1)))
        s, t = -0.7, 1.9
        g = apply_D(f, DiffPair(s, t))
        bound = 0.0
        for k in range(0, 2500):
            layer = sum(abs(c) for _, c in homogeneous_coefficient(f, k))
            if layer == 0.0:
                continue
            bound += gamma_ratio(2, s, t, k) * layer * dim_spherical_harmonics(2, k) * 0.5**k
        for x in ([0.5, 0.0], [0.3, -0.4], [0.0, 0.0]):
            assert abs(evaluate(g, x, tol=1e-10)) <= bound * (1 + 1e-9) + 1e-9


class TestApplyI:
    def test_order_zero_reduces_to_evaluate(self):
        f = HarmonicExpansion(2, (ZonalTerm(1, ZETA2, 1.4),))
        x = [0.3, 0.4]
        assert apply_I(f, DiffPair(0.9, 0.0), x) == pytest.approx(
            evaluate(f, x), rel=1e-14
        )

    def test_constant_gives_pure_weight(self):
        f = constant(3)
        x = np.array([0.5, 0.1, 0.0])
        t = 1.7
        want = (1.0 - float(x @ x)) ** t
        assert apply_I(f, DiffPair(-0.4, t), x) == pytest.approx(want, rel=1e-12)

    def test_kernel_atom_shift_formula(self):
        # I f at r zeta equals (1-r^2)^t R_{s+t}(r zeta, zeta)
        s, t, r = 0.0, 1.0, 0.55
        f = HarmonicExpansion(2, (KernelAtom(s, ZETA2),))
        got = apply_I(f, DiffPair(s, t), [r, 0.0], tol=1e-12)
        oracle = (1 - r**2) ** t * sum(
            gamma_product_oracle(2, s + t, k) * 2 * r**k if k else 1.0
            for k in range(600)
        )
        assert got == pytest.approx(oracle, rel=1e-9)


class TestHomogeneousLayers:
    def test_constant_layers(self):
        f = constant(2, 3.0)
        assert homogeneous_coefficient(f, 0) == [(ZETA2, 3.0)]
        assert homogeneous_coefficient(f, 4) == []

    def test_kernel_atom_layer_is_coefficient(self):
        f = HarmonicExpansion(3, (KernelAtom(-2.8, ZETA3),))
        for k in (0, 1, 6):
            [(pole, c)] = homogeneous_coefficient(f, k)
            assert pole == ZETA3
            assert c == pytest.approx(gamma_product_oracle(3, -2.8, k), rel=1e-12)

    def test_layers_scale_under_the_operator(self):
        f = HarmonicExpansion(3, (KernelAtom(0.6, ZETA3, 2.0),))
        s, t = -1.1, 2.2
        g = apply_D(f, DiffPair(s, t))
        for k in (0, 3, 11):
            [(_, c0)] = homogeneous_coefficient(f, k)
            [(_, c1)] = homogeneous_coefficient(g, k)
            assert c1 == pytest.approx(c0 * gamma_ratio(3, s, t, k), rel=1e-12)


class TestSerialization:
    def test_round_trip(self):
        f = HarmonicExpansion(
            2,
            (
                KernelAtom(0.3, ZETA2, 1.5),
                ZonalTerm(4, (0.0, 1.0), -0.25),
            ),
        )
        assert expansion_from_json(expansion_to_json(f)) == f

    def test_series_atom_round_trip(self):
        f = apply_D(
            HarmonicExpansion(2, (KernelAtom(0.3, ZETA2),)), DiffPair(1.0, 0.5)
        )
        assert expansion_from_json(expansion_to_json(f)) == f

    def test_wire_format_fields(self):
        f = HarmonicExpansion(2, (ZonalTerm(2, ZETA2, 0.5), KernelAtom(-1.0, (0.3, 0.0))))
        payload = json.loads(expansion_to_json(f))
        assert payload["dimension"] == 2
        kinds = {a["kind"] for a in payload["atoms"]}
        assert kinds == {"zonal", "kernel"}
        zatom = next(a for a in payload["atoms"] if a["kind"] == "zonal")
        assert set(zatom) == {"kind", "k", "pole", "weight"}
        katom = next(a for a in payload["atoms"] if a["kind"] == "kernel")
        assert set(katom) == {"kind", "s", "pole", "weight"}

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            expansion_from_json('{"dimension": 2, "atoms": [{"kind": "puff", "pole": [1, 0]}]}')
