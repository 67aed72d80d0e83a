import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from smchmc.potentials import (
    DomainError,
    anisotropic_gaussian,
    cocoercivity_residual,
    double_well,
    evaluate_gradient,
    evaluate_potential,
    finite_difference_gradient,
    isotropic_gaussian,
    parse_model,
    rough_well,
)

coords = st.floats(-3.5, 3.5, allow_nan=False)


def test_gaussian_values():
    m = isotropic_gaussian(2.0, 3)
    x = np.array([1.0, -1.0, 2.0])
    assert evaluate_potential(m, x) == pytest.approx(6.0)
    assert np.allclose(evaluate_gradient(m, x), 2.0 * x)
    assert m.K == m.L == 2.0


def test_anisotropic_constants():
    m = anisotropic_gaussian([0.5, 4.0])
    assert (m.K, m.L) == (0.5, 4.0)
    assert m.energy([[1.0, 1.0], [0.0, 1.0]]).tolist() == [2.25, 2.0]


def test_double_well_values():
    m = double_well()
    assert m.energy([0.0]) == 0.5
    assert m.energy([1.0]) == 0.0
    assert m.gradient([1.0])[0] == 0.0
    assert m.K is None and m.L == 94.0


def test_rough_well_values():
    m = rough_well(1.0)
    assert m.energy([1.0]) == pytest.approx(1.5)
    assert m.gradient([-1.0])[0] == pytest.approx(-3.5)
    assert m.gradient([0.0])[0] == 0.0


@pytest.mark.parametrize("model", [isotropic_gaussian(1.5, 2), anisotropic_gaussian([1, 3]), double_well(), rough_well(0.7)])
@given(data=st.data())
def test_gradient_matches_finite_differences(model, data):
    x = data.draw(arrays(float, (model.dim,), elements=coords))
    g = model.gradient(x)
    fd = finite_difference_gradient(model, x)
    scale = max(1.0, np.max(np.abs(g)))
    assert np.max(np.abs(g - fd)) < 1e-6 * scale


@pytest.mark.parametrize("model", [isotropic_gaussian(2.0, 2), anisotropic_gaussian([0.3, 2.0]), rough_well(1.0)])
@given(data=st.data())
def test_cocoercivity(model, data):
    # |x| <= box so the declared L is valid
    x = data.draw(arrays(float, (model.dim,), elements=coords))
    y = data.draw(arrays(float, (model.dim,), elements=coords))
    assert cocoercivity_residual(model, x, y) >= -1e-9


def test_cocoercivity_rejects_non_convex():
    with pytest.raises(DomainError):
        cocoercivity_residual(double_well(), [0.0], [1.0])


def test_batched_evaluation():
    m = anisotropic_gaussian([1.0, 2.0])
    x = np.arange(12.0).reshape(3, 2, 2)
    assert m.energy(x).shape == (3, 2)
    assert m.gradient(x).shape == x.shape


def test_parse_model():
    assert parse_model("iso:2,3") == isotropic_gaussian(2.0, 3)
    assert parse_model("aniso:1,4").L == 4.0
    assert parse_model("dw").kind == "double_well"
    assert parse_model("rough:0.5").params == (0.5,)
    assert parse_model("isotropic_gaussian").dim == 1
    for bad in ("nope", "aniso", "iso:a", "dw:1", "iso:1,1.5"):
        with pytest.raises(ValueError):
            parse_model(bad)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        isotropic_gaussian(0.0)
    with pytest.raises(ValueError):
        anisotropic_gaussian([1.0, -1.0])
    with pytest.raises(ValueError):
        isotropic_gaussian(1.0, 2).energy([1.0])
    with pytest.raises(DomainError):
        double_well().curvatures
    with pytest.raises(ValueError):
        finite_difference_gradient(double_well(), [0.0], step=0.0)
