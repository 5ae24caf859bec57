import numpy as np
import pytest

from bolt.cloth.model import ClothModel
from bolt.cloth.params import SimParams
from bolt.cloth.sim import Collider, SimState, simulate
from bolt.drape import ProgressiveDraper, layer_order, outfit_grid, progressive_drape, union_all
from bolt.errors import ConfigurationError
from bolt.fixtures import interpenetrating_tubes, resting_tube, sphere_body
from bolt.sdf import GridSpec, SampledSDF, build_sdf, sample


@pytest.fixture(scope="module")
def body():
    return sphere_body()


def test_layer_order_is_stable():
    class G:
        def __init__(self, layer):
            self.layer = layer

    assert layer_order([G(1), G(0), G(1), G(0)]) == [1, 3, 0, 2]


def test_union_of_nothing_is_far_everywhere():
    grid = GridSpec((0, 0, 0), 1.0, (3, 3, 3))
    assert np.all(np.isposinf(union_all([], 0.2, grid=grid).values))
    with pytest.raises(ConfigurationError):
        union_all([], 0.2)


def test_single_garment_equals_plain_simulation(body):
    tube = resting_tube(body, 8.5, height=3.0, n_high=3)
    grid = outfit_grid([tube.mesh3d, body], resolution=48)
    p = SimParams()
    res = progressive_drape([tube], body, p, frames=2, grid=grid)
    m = ClothModel.from_garments([tube])
    st = SimState.initial(m, tube.mesh3d.positions)
    sdf = SampledSDF(grid, build_sdf(body, grid).values - p.collision.eps_sdf)
    simulate(st, m, p, Collider(sdf), 2)
    assert np.array_equal(res.garments[0].mesh3d.positions, st.positions)
    assert res.warnings == []


def test_later_layers_see_a_smaller_field(body):
    seen = {}
    tubes = interpenetrating_tubes((10.5, 10.35), n_around=24, n_high=4)
    res = progressive_drape(tubes, body, frames=3, resolution=48,
                            on_sdf=lambda i, s: seen.__setitem__(i, s))
    assert res.order == [0, 1]
    assert np.all(seen[1].values <= seen[0].values)
    # the last garment joins the returned field only on request
    assert np.array_equal(res.sdf.values, seen[1].values)
    phi = sample(seen[1], res.garments[1].mesh3d.positions)[0]
    assert np.mean(phi >= -0.05 * 0.2) >= 0.99


def test_final_union_adds_last_layer(body):
    tubes = interpenetrating_tubes((10.5,), n_around=16, n_high=2)
    a = progressive_drape(tubes, body, frames=1, resolution=32)
    b = progressive_drape(tubes, body, frames=1, resolution=32, final_union=True)
    assert np.all(b.sdf.values <= a.sdf.values) and np.any(b.sdf.values < a.sdf.values)


def test_estimator_wrapper(body):
    tubes = interpenetrating_tubes((10.5,), n_around=16, n_high=2)
    d = ProgressiveDraper(frames=1, resolution=32).fit(tubes, body)
    assert len(d.draped_) == 1 and d.result_.layers[0].frames == 1
    with pytest.raises(ConfigurationError):
        ProgressiveDraper(substeps=0).fit(tubes, body)
    with pytest.raises(ConfigurationError):
        progressive_drape([], None)
