import numpy as np
import pytest
import sympy as sym

from boussinesq_bench.bench import mms
from boussinesq_bench.numerics import mesh


def test_registered_families():
    assert set(mms.family_names()) == {'trig', 'polynomial-bump', 'time-modulated-trig'}

@pytest.mark.parametrize('family', ['trig', 'polynomial-bump', 'time-modulated-trig'])
def test_exact_velocity_is_solenoidal(grid, params, family):
    solution = mms.mms_generate(family, grid, params)
    assert sym.simplify(solution.divergence) == 0
    velocity = solution.velocity()
    assert np.abs(mesh.divergence(velocity).values).max() < 1e-10 * max(1.0, velocity.max_speed())

@pytest.mark.parametrize('family', ['trig', 'polynomial-bump'])
def test_trace_has_no_net_flux(rectangle, family):
    solution = mms.mms_generate(family, rectangle)
    assert solution.trace().net_flux() == pytest.approx(0.0, abs=1e-12)

def test_unknown_family_or_regime(grid):
    with pytest.raises(ValueError):
        mms.mms_generate('gaussian', grid)
    with pytest.raises(ValueError):
        mms.mms_generate('trig', grid, regime='euler')

def test_time_dependence_of_sources(grid, params):
    t = sym.Symbol('t', real=True)
    steady = mms.mms_generate('trig', grid, params, 'stokes')
    modulated = mms.mms_generate('time-modulated-trig', grid, params, 'stokes')
    assert t not in steady.expressions['f1u'].free_symbols
    assert t in modulated.expressions['f1u'].free_symbols
    assert mms.ManufacturedFamily.retrieve_registry()['time-modulated-trig']().time_dependent

def test_trace_matches_sampled_velocity(grid):
    solution = mms.mms_generate('trig', grid)
    assert np.allclose(solution.trace().normal, solution.velocity().normal_values, atol=1e-12)

def test_amplitude_scales_fields(grid, params):
    unit = mms.mms_generate('trig', grid, params)
    scaled = mms.mms_generate('trig', grid, params, amplitude=0.5)
    assert np.allclose(scaled.temperature().values, 0.5 * unit.temperature().values)
    assert scaled.pressure().mean() == pytest.approx(0.0, abs=1e-12)

def test_navier_stokes_sources_add_advection(grid, params):
    stokes = mms.mms_generate('trig', grid, params, 'stokes')
    navier_stokes = mms.mms_generate('trig', grid, params, 'navier-stokes')
    f1_stokes, f2_stokes = stokes.sources()
    f1_full, f2_full = navier_stokes.sources()
    assert mesh.norms(f1_full - f1_stokes).l2 > 1e-3
    assert mesh.norms(f2_full - f2_stokes).l2 > 1e-3

def test_boundary_data_follow_time(grid, params):
    solution = mms.mms_generate('time-modulated-trig', grid, params, 'stokes')
    trace, flux = solution.boundary().at(0.25)
    assert np.allclose(trace.normal, 1.5 * solution.trace(0.0).normal)
    assert np.allclose(flux.values, 1.5 * solution.flux(0.0).values)
