import numpy as np
import pytest
from hypothesis import given, strategies as st

from bolt.errors import ConfigurationError
from bolt.primitives import icosphere
from bolt.sdf import (GridSpec, SampledSDF, build_sdf, dump_sdf, load_sdf, resample, sample,
                      sdf_union)


@pytest.fixture(scope="module")
def sphere_sdf():
    m = icosphere(1.0, 4)
    grid = GridSpec.covering(*m.bounds(), resolution=33, margin=1.5)
    return m, build_sdf(m, grid)


def node_value(sdf, p):
    idx = np.round((np.asarray(p) - sdf.origin) / sdf.cell_size).astype(int)
    return sdf.values[tuple(idx)], sdf.origin + sdf.cell_size * idx


def test_sphere_center_and_far_node(sphere_sdf):
    _, sdf = sphere_sdf
    v, p = node_value(sdf, [0, 0, 0])
    assert v == pytest.approx(-1.0, abs=sdf.cell_size)
    v, p = node_value(sdf, [2.0, 0, 0])
    assert v == pytest.approx(np.linalg.norm(p) - 1.0, abs=sdf.cell_size)


def test_sphere_sdf_matches_analytic_distance(sphere_sdf):
    _, sdf = sphere_sdf
    nodes = sdf.grid.nodes()
    ref = np.linalg.norm(nodes, axis=1) - 1.0
    assert np.abs(sdf.values.ravel() - ref).max() < 0.01


def test_grid_must_cover_mesh():
    m = icosphere(1.0, 2)
    with pytest.raises(ConfigurationError, match="cover"):
        build_sdf(m, GridSpec((-1.0, -1.0, -1.0), 0.1, (21, 21, 21)))


def test_union_with_itself_at_zero_eps_is_identity(sphere_sdf):
    _, s = sphere_sdf
    u = sdf_union(s, s, eps_sdf=0.0)
    assert np.array_equal(u.values, s.values)


def test_union_with_empty_is_expanded_once(sphere_sdf):
    _, s = sphere_sdf
    u = sdf_union(SampledSDF.empty(s.grid), s, eps_sdf=0.2)
    assert np.allclose(u.values, s.values - 0.2)
    assert u.expanded and u.offset_applied == pytest.approx(0.2)
    # further unions with the expanded field do not expand it again
    again = sdf_union(u, SampledSDF.empty(s.grid), eps_sdf=0.2)
    assert np.allclose(again.values, s.values - 0.2)


def test_per_union_mode_accumulates(sphere_sdf):
    _, s = sphere_sdf
    u = sdf_union(sdf_union(s, s, 0.2, "per_union"), s, 0.2, "per_union")
    assert np.allclose(u.values, s.values - 0.4)


def _shifted(base, dx):
    return SampledSDF(base.grid, np.roll(base.values, dx, axis=0))


@given(st.permutations([0, 1, 2]))
def test_per_operand_union_is_order_independent(perm):
    m = icosphere(1.0, 2)
    grid = GridSpec.covering(*m.bounds(), resolution=12, margin=2.0)
    base = build_sdf(m, grid)
    fields = [_shifted(base, k) for k in (-2, 0, 3)]
    ref = sdf_union(sdf_union(fields[0], fields[1]), fields[2])
    got = sdf_union(fields[perm[0]], sdf_union(fields[perm[1]], fields[perm[2]]))
    assert np.array_equal(ref.values, got.values)


def test_two_sphere_union_level_set():
    a = icosphere(1.0, 4, center=(-0.6, 0, 0))
    b = icosphere(1.0, 4, center=(0.7, 0.2, 0))
    lo = np.minimum(a.bounds()[0], b.bounds()[0])
    hi = np.maximum(a.bounds()[1], b.bounds()[1])
    grid = GridSpec.covering(lo, hi, resolution=41, margin=1.0)
    u = sdf_union(build_sdf(a, grid), build_sdf(b, grid), eps_sdf=0.0)
    nodes = grid.nodes()
    analytic = np.minimum(np.linalg.norm(nodes - [-0.6, 0, 0], axis=1),
                          np.linalg.norm(nodes - [0.7, 0.2, 0], axis=1)) - 1.0
    h = grid.cell_size
    # zero crossings: nodes whose sampled sign differs from a neighbor's
    v = u.values
    crossing = np.zeros(v.shape, bool)
    for ax in range(3):
        d = np.sign(np.take(v, range(1, v.shape[ax]), ax)) != np.sign(np.take(v, range(v.shape[ax] - 1), ax))
        sl = [slice(None)] * 3
        sl[ax] = slice(0, -1)
        crossing[tuple(sl)] |= d
    assert np.abs(analytic[crossing.ravel()]).max() <= 1.5 * h
    # and every analytic surface node is near a sampled crossing
    near = np.abs(analytic) < 0.25 * h
    assert np.all(np.abs(v.ravel()[near]) <= 1.5 * h)


def test_sample_node_exact_and_linear_field_exact(rng):
    grid = GridSpec((0.0, 0.0, 0.0), 0.5, (6, 7, 8))
    nodes = grid.nodes()
    c = np.array([0.3, -1.2, 2.0])
    s = SampledSDF(grid, (nodes @ c + 0.7).reshape(grid.dims))
    P = rng.uniform(0.1, 2.4, size=(50, 3))
    val, grad = sample(s, P)
    assert np.abs(val - (P @ c + 0.7)).max() < 1e-12
    assert np.abs(grad - c).max() < 1e-12
    node = nodes[37]
    assert sample(s, node)[0] == s.values.ravel()[37]


def test_sphere_gradient_points_outward(sphere_sdf):
    _, s = sphere_sdf
    _, g = sample(s, [2.0, 0.0, 0.0])
    assert np.allclose(g, [1.0, 0.0, 0.0], atol=1e-2)


def test_resample_and_dump_roundtrip(tmp_path, sphere_sdf):
    _, s = sphere_sdf
    r = resample(s, s.grid)
    assert np.allclose(r.values, s.values, atol=1e-12)
    dump_sdf(s, tmp_path / "s.bin")
    t = load_sdf(tmp_path / "s.bin")
    assert t.grid == s.grid and np.array_equal(t.values, s.values)
