import numpy as np
import pytest

from shellfem.geometry import make_chart
from shellfem.strain import (bending_strain, covariant_derivative,
                             membrane_strain, shear_strain, strains)


def rand_fields(rng, n):
    th = rng.standard_normal((n, 2))
    dth = rng.standard_normal((n, 2, 2))
    u = rng.standard_normal((n, 2))
    du = rng.standard_normal((n, 2, 2))
    w = rng.standard_normal(n)
    dw = rng.standard_normal((n, 2))
    return th, dth, u, du, w, dw


def test_strains_linear_in_fields():
    chart = make_chart("sphere")
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.5, 1.0, (10, 2))
    g = chart.evaluate(pts)
    f1 = rand_fields(rng, 10)
    f2 = rand_fields(rng, 10)
    a, b = 0.7, -1.3
    combo = tuple(a * x + b * y for x, y in zip(f1, f2))
    r1, g1, t1 = strains(*f1, g)
    r2, g2, t2 = strains(*f2, g)
    rc, gc, tc = strains(*combo, g)
    assert np.allclose(rc, a * r1 + b * r2)
    assert np.allclose(gc, a * g1 + b * g2)
    assert np.allclose(tc, a * t1 + b * t2)


def test_strain_tensors_symmetric():
    chart = make_chart("hypar", coeff=0.8)
    rng = np.random.default_rng(4)
    pts = rng.uniform(0.1, 0.9, (10, 2))
    g = chart.evaluate(pts)
    rho, gam, _ = strains(*rand_fields(rng, 10), g)
    assert np.allclose(rho, np.swapaxes(rho, -1, -2))
    assert np.allclose(gam, np.swapaxes(gam, -1, -2))


def test_plate_reduction():
    # flat chart: no curvature or connection, so the strains reduce to
    # rho = sym grad theta, gamma = sym grad u, tau = grad w + theta
    chart = make_chart("plate")
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 1, (10, 2))
    g = chart.evaluate(pts)
    th, dth, u, du, w, dw = rand_fields(rng, 10)
    rho, gam, tau = strains(th, dth, u, du, w, dw, g)
    assert np.allclose(rho, 0.5 * (dth + np.swapaxes(dth, -1, -2)))
    assert np.allclose(gam, 0.5 * (du + np.swapaxes(du, -1, -2)))
    assert np.allclose(tau, dw + th)


def test_cylinder_curvature_coupling():
    # unit cylinder in arclength coordinates: b_11 = -1/R is the only
    # curvature entry, so w enters gamma_11 and u_1 enters tau_1
    R = 2.0
    chart = make_chart("cylinder", radius=R)
    pts = np.array([[0.3, 0.4]])
    g = chart.evaluate(pts)
    b11 = g.b_cov[0, 0, 0]
    assert abs(abs(b11) - 1.0 / R) < 1e-12
    th = np.zeros((1, 2))
    dth = np.zeros((1, 2, 2))
    u = np.zeros((1, 2))
    du = np.zeros((1, 2, 2))
    w = np.array([1.0])
    dw = np.zeros((1, 2))
    rho, gam, tau = strains(th, dth, u, du, w, dw, g)
    assert gam[0, 0, 0] == pytest.approx(-b11)      # gamma_11 = -b_11 w
    assert np.allclose(gam[0] - np.array([[-b11, 0], [0, 0]]), 0)
    assert np.allclose(tau, 0)                       # dw = 0, u = 0
    u = np.array([[1.0, 0.0]])
    tau = shear_strain(th, u, dw, g)
    assert tau[0, 0] == pytest.approx(g.b_mix[0, 0, 0])  # tau_a = b^g_a u_g


def test_covariant_derivative_against_hand_formula():
    chart = make_chart("sphere")
    rng = np.random.default_rng(9)
    pts = rng.uniform(0.5, 1.2, (5, 2))
    g = chart.evaluate(pts)
    vec = rng.standard_normal((5, 2))
    grad = rng.standard_normal((5, 2, 2))
    cd = covariant_derivative(vec, grad, g.christoffel)
    for n in range(5):
        for a in range(2):
            for b in range(2):
                want = grad[n, a, b] - sum(
                    g.christoffel[n, l, a, b] * vec[n, l] for l in range(2))
                assert cd[n, a, b] == pytest.approx(want)


def test_individual_strain_functions_match_bundle():
    chart = make_chart("sphere")
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.5, 1.0, (6, 2))
    g = chart.evaluate(pts)
    th, dth, u, du, w, dw = rand_fields(rng, 6)
    rho, gam, tau = strains(th, dth, u, du, w, dw, g)
    assert np.allclose(rho, bending_strain(th, dth, u, du, w, g))
    assert np.allclose(gam, membrane_strain(u, du, w, g))
    assert np.allclose(tau, shear_strain(th, u, dw, g))
