import numpy as np
import pytest

from boussinesq_bench.bench import checks
from boussinesq_bench.numerics import mesh
from boussinesq_bench.numerics import semigroup
from boussinesq_bench import errors
from boussinesq_bench import utils


@pytest.fixture(scope='module')
def small():
    return mesh.Grid(6, 6)

@pytest.fixture(scope='module')
def operator(small):
    return semigroup.assemble_coupled_operator(small, mesh.PhysicalParams(lambda0=1.5))

@pytest.fixture
def state(operator):
    return utils.random_generator(0, 'state').standard_normal(operator.dimension)

def _relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)

def test_dimension(small, operator):
    modes = small.interior_edges.size - (small.n_cells - 1)
    assert operator.dimension == modes + small.n_cells
    assert operator.blocks['velocity'] == slice(0, modes)

def test_rest_generator_is_block_triangular(operator):
    blocks = operator.blocks
    assert not operator.matrix[blocks['temperature'], blocks['velocity']].any()
    assert operator.matrix[blocks['velocity'], blocks['temperature']].any()

def test_semigroup_law(operator, state):
    s, t = 0.03, 0.05
    combined = semigroup.semigroup_apply(operator, s + t, state)
    composed = semigroup.semigroup_apply(operator, s, semigroup.semigroup_apply(operator, t, state))
    assert _relative(composed, combined) <= 1e-9
    assert np.allclose(semigroup.semigroup_apply(operator, 0.0, state), state)

def test_eigen_and_expm_agree(operator, state):
    eigen = semigroup.semigroup_apply(operator, 0.05, state, method='eigen')
    expm = semigroup.semigroup_apply(operator, 0.05, state, method='expm')
    assert _relative(eigen, expm) <= 1e-9

def test_half_powers_compose(operator, state):
    half = semigroup.fractional_power_apply(operator, 0.5, state)
    full = operator.shifted() @ state
    assert _relative(semigroup.fractional_power_apply(operator, 0.5, half), full) <= 1e-8

def test_powers_commute_with_semigroup(operator, state):
    evolved = semigroup.semigroup_apply(operator, 0.05, state)
    first = semigroup.fractional_power_apply(operator, 0.5, evolved)
    second = semigroup.semigroup_apply(operator, 0.05,
                                       semigroup.fractional_power_apply(operator, 0.5, state))
    assert _relative(first, second) <= 1e-8

def test_integer_powers(operator, state):
    assert _relative(semigroup.fractional_power_apply(operator, 1.0, state),
                     operator.shifted() @ state) <= 1e-10
    assert np.allclose(semigroup.fractional_power_apply(operator, 0.0, state), state)

def test_balakrishnan_matches_eigen(operator, state):
    eigen = semigroup.fractional_power_apply(operator, 0.5, state, method='eigen')
    quadrature = semigroup.fractional_power_apply(operator, 0.5, state, method='balakrishnan')
    assert _relative(quadrature, eigen) <= 1e-6

def test_invalid_arguments(operator, state):
    with pytest.raises(ValueError):
        semigroup.semigroup_apply(operator, -0.1, state)
    with pytest.raises(ValueError):
        semigroup.fractional_power_apply(operator, 2.5, state)
    with pytest.raises(ValueError):
        semigroup.assemble_coupled_operator(None, mesh.PhysicalParams())

def test_dense_assembly_is_capped():
    with pytest.raises(errors.AssemblyError):
        semigroup.solenoidal_basis(mesh.Grid(13, 13))

def test_shift_must_stabilize(small):
    with pytest.raises(errors.AssemblyError):
        semigroup.assemble_coupled_operator(small, mesh.PhysicalParams(), lambda0=-1e3)

def test_encode_decode(small, operator):
    velocity, temperature = checks.random_solenoidal(small, utils.random_generator(0, 'codec'))
    decoded_velocity, decoded_temperature = semigroup.decode(
        operator, semigroup.encode(operator, velocity, temperature))
    assert mesh.norms(decoded_velocity - velocity).l2 <= 1e-10 * mesh.norms(velocity).l2
    assert np.allclose(decoded_temperature.values, temperature.values)

def test_duhamel_keeps_constant_lift(operator, state):
    lifts = np.tile(state, (6, 1))
    states = semigroup.duhamel_solve(operator, lifts, state, 0.02)
    assert states.shape == (6, operator.dimension)
    assert np.allclose(states, state, rtol=0, atol=1e-10 * np.abs(state).max())

def test_duhamel_without_lift_is_semigroup(operator, state):
    lifts = np.zeros((5, operator.dimension))
    states = semigroup.duhamel_solve(operator, lifts, state, 0.02)
    assert _relative(states[-1], semigroup.semigroup_apply(operator, 0.08, state)) <= 1e-9

def test_smoothing_probe(operator):
    table = semigroup.smoothing_probe(operator, 0.5, [0.01, 0.1, 1.0])
    assert 0 < table.constant < np.inf
    assert [row['t'] for row in table.rows()] == [0.01, 0.1, 1.0]
    with pytest.raises(ValueError):
        semigroup.smoothing_probe(operator, 0.5, [0.1, 0.01])

def test_analyticity_probe(operator):
    assert semigroup.analyticity_probe(operator, 20) > 0
    assert semigroup.analyticity_probe(operator, 0) == float('inf')

def test_spectrum_report(operator):
    report = semigroup.spectrum_report(operator)
    assert report.stability_margin > 0
    assert report.mapping_error < 1e-8
    assert report.eigenvalues.size == operator.dimension
