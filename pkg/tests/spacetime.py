import numpy as np
import pytest
from _util import assert_close, minkowski, support_file
from pytest_relaxed import raises

from lightcone.exceptions import ChartError, NonFiniteError, SpecError
from lightcone.spacetime import (
    builtin,
    christoffel_at,
    lie_derivative_T,
    metric_at,
    parse_metric_spec,
    probe_points,
    riemann_at,
)


def _constant_curvature(g, K):
    return -K * (
        np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
    )


class builtin_models:
    def minkowski_is_eta(self):
        spec = minkowski(3)
        at = metric_at(spec, (0.5, -1.0, 2.0))
        np.testing.assert_array_equal(at.g, np.diag([-1.0, 1.0, 1.0]))
        assert at.signature() == (1, 2)

    def aliases_resolve(self):
        assert builtin("ds").model.name == "desitter_slicing"
        assert builtin("flat", dim=2).dim == 2

    @raises(SpecError)
    def unknown_model(self):
        builtin("anti_de_sitter")

    @raises(SpecError)
    def unknown_parameter(self):
        builtin("minkowski", K=1.0)

    @raises(SpecError)
    def schwarzschild_is_four_dimensional(self):
        builtin("schwarzschild", dim=3)

    @raises(SpecError)
    def negative_mass(self):
        builtin("schwarzschild", M=-1.0)

    def scaled_metric(self):
        spec = builtin("desitter", K=1.0).scaled(3.0)
        g = metric_at(spec, (0.0, 0.0, 0.0, 0.0)).g
        assert_close(g, 9.0 * np.diag([-1.0, 1.0, 1.0, 1.0]))
        assert "scaled by 3" in spec.label

    class chart:
        @raises(ChartError)
        def inside_the_horizon_excision(self):
            metric_at(builtin("schwarzschild"), (0.0, 1.0, 0.0, 0.0))

        def stencil_leaving_the_chart_names_the_point(self):
            spec = builtin("schwarzschild")
            # 2.2 M excision radius; the stencil around 2.2 + 1e-9 crosses it
            with pytest.raises(ChartError) as info:
                riemann_at(spec, (0.0, 2.2 + 1e-9, 0.0, 0.0))
            assert info.value.point is not None

        @raises(SpecError)
        def wrong_point_dimension(self):
            metric_at(minkowski(), (0.0, 1.0))

        def non_finite_metric_inside_the_chart(self):
            spec = parse_metric_spec(
                '[model]\ndim = 2\n[lapse]\nlapse = "1"\n'
                '[spatial]\ng11 = "1/t^2"\n'
            )
            with np.errstate(all="ignore"):
                with pytest.raises(NonFiniteError) as info:
                    metric_at(spec, (0.0, 0.5))
            assert info.value.quantity == "metric"


class christoffel:
    def vanishes_for_minkowski(self):
        for method in ("analytic", "fd"):
            gamma = christoffel_at(minkowski(), (1, 2, 3, 4), method).gamma
            assert np.max(np.abs(gamma)) < 1e-12

    def lower_index_symmetry(self):
        spec = builtin("schwarzschild")
        for method in ("analytic", "fd"):
            at = christoffel_at(spec, (0.0, 5.0, 1.0, -2.0), method)
            assert at.symmetry_residual() == 0.0

    def de_sitter_closed_form(self):
        # h = exp(2t) delta: Gamma^0_ii = exp(2t), Gamma^i_0i = 1
        t = 0.4
        gamma = christoffel_at(builtin("desitter"), (t, 0, 0, 0)).gamma
        for i in range(1, 4):
            assert gamma[0, i, i] == pytest.approx(np.exp(2 * t), rel=1e-7)
            assert gamma[i, 0, i] == pytest.approx(1.0, rel=1e-7)
        assert gamma[0, 0, 0] == pytest.approx(0.0, abs=1e-9)

    def analytic_matches_fd(self):
        spec = builtin("schwarzschild", M=1.0)
        p = (0.0, 4.0, 2.0, 1.0)
        analytic = christoffel_at(spec, p, "analytic").gamma
        fd = christoffel_at(spec, p, "fd").gamma
        assert_close(analytic, fd, rel=1e-6, abs=1e-8)

    @raises(SpecError)
    def analytic_needs_a_foliation(self):
        spec = parse_metric_spec(support_file("general.metric"))
        christoffel_at(spec, (0.0, 0.0, 0.0), "analytic")

    @raises(ValueError)
    def unknown_method(self):
        christoffel_at(minkowski(), (0, 0, 0, 0), "symbolic")


class riemann:
    def flat_for_minkowski_and_sheared_minkowski(self):
        general = parse_metric_spec(support_file("general.metric"))
        assert np.max(np.abs(riemann_at(general, (0, 0, 0)).riem)) < 1e-8
        flat = riemann_at(minkowski(), (0.3, 1, -2, 0.5), "fd")
        assert np.max(np.abs(flat.riem)) < 1e-8

    def de_sitter_has_constant_curvature(self):
        for K in (0.5, 1.0, 2.0):
            spec = builtin("desitter", K=K)
            p = (0.2, 0.1, -0.3, 0.7)
            g = metric_at(spec, p).g
            at = riemann_at(spec, p)
            assert_close(
                at.riem, _constant_curvature(g, K), rel=1e-5, abs=1e-6
            )
            assert_close(at.ricci, 3 * K * g, rel=1e-5, abs=1e-6)

    def schwarzschild_is_ricci_flat_with_known_kretschmann(self):
        spec = builtin("schwarzschild", M=1.0)
        p = np.array([0.0, 6.0, 0.0, 0.0])
        at = riemann_at(spec, p)
        assert np.max(np.abs(at.ricci)) < 1e-6
        ginv = np.linalg.inv(metric_at(spec, p).g)
        up = np.einsum(
            "ai,bj,ck,dl,ijkl->abcd", ginv, ginv, ginv, ginv, at.riem
        )
        kretschmann = float(np.sum(up * at.riem))
        assert kretschmann == pytest.approx(48.0 / 6.0**6, rel=1e-4)

    def static_sphere_slices_have_positive_curvature(self):
        spec = builtin("static_sphere", K=1.0)
        p = (0.0, 0.3, 0.2, -0.1)
        g = metric_at(spec, p).g
        riem = riemann_at(spec, p).riem
        spatial = _constant_curvature(g, 1.0)
        assert_close(riem[1:, 1:, 1:, 1:], spatial[1:, 1:, 1:, 1:], rel=1e-5)
        assert np.max(np.abs(riem[0])) < 1e-6

    def index_symmetries_hold(self):
        spec = builtin("schwarzschild")
        for method, limit in (("analytic", 1e-9), ("fd", 1e-5)):
            at = riemann_at(spec, (0.0, 4.0, 3.0, 1.0), method)
            residuals = at.symmetry_residuals()
            assert set(residuals) == {
                "antisymmetry_ab",
                "antisymmetry_cd",
                "pair_symmetry",
                "bianchi",
            }
            assert max(residuals.values()) < limit

    def analytic_matches_fd(self):
        spec = builtin("static_sphere")
        p = (0.0, 0.5, -0.25, 0.1)
        analytic = riemann_at(spec, p, "analytic").riem
        fd = riemann_at(spec, p, "fd").riem
        assert_close(analytic, fd, rel=1e-4, abs=1e-5)

    def scaling_multiplies_the_lowered_tensor(self):
        spec = builtin("desitter")
        p = (0.1, 0, 0, 0)
        base = riemann_at(spec, p).riem
        scaled = riemann_at(spec.scaled(2.0), p).riem
        assert_close(scaled, 4.0 * base, rel=1e-6, abs=1e-8)

    def curvature_sign_fault_flips_the_tensor(self):
        spec = builtin("desitter")
        p = (0.1, 0, 0, 0)
        faulty = spec.with_fault("curvature-sign")
        assert_close(riemann_at(faulty, p).riem, -riemann_at(spec, p).riem)

    @raises(ValueError)
    def unknown_fault(self):
        minkowski().with_fault("torsion")


class lie_derivative:
    def vanishes_for_static_metrics(self):
        out = lie_derivative_T(builtin("static_sphere"), (0.0, 0.3, 0.1, 0))
        assert np.max(np.abs(out)) < 1e-9

    def de_sitter_expansion(self):
        # n = 1, d_t h = 2 exp(2t) delta
        t = -0.5
        out = lie_derivative_T(builtin("desitter"), (t, 0, 0, 0))
        assert_close(
            out[1:, 1:], 2 * np.exp(2 * t) * np.eye(3), rel=1e-7, abs=1e-9
        )
        assert np.max(np.abs(out[0])) < 1e-9

    @raises(SpecError)
    def needs_a_foliation(self):
        spec = parse_metric_spec(support_file("general.metric"))
        lie_derivative_T(spec, (0, 0, 0))


class probes:
    def are_deterministic_and_inside(self):
        spec = builtin("schwarzschild")
        a = probe_points(spec, 12, seed=4)
        b = probe_points(spec, 12, seed=4)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (12, 4)
        assert spec.domain.contains(a).all()

    def seeds_differ(self):
        spec = minkowski()
        assert not np.allclose(
            probe_points(spec, 5, seed=1), probe_points(spec, 5, seed=2)
        )

    def periodic_axes_sample_one_period(self):
        spec = builtin("torus", L=3.0)
        points = probe_points(spec, 40)
        assert points[:, 1:].min() >= 0.0
        assert points[:, 1:].max() <= 3.0
