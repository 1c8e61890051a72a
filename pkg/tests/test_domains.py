import numpy as np
import pytest

from ghsdensity.domains import DomainSpec, generate
from ghsdensity.errors import GenerationError
from ghsdensity.mmgraph import path_components


def test_square_half_mesh_is_three_by_three():
    g = generate(DomainSpec("square", 0.5))
    assert len(g.domain_ids) == 1 and len(g.boundary_ids) == 8
    assert np.allclose(g.xy[g.domain_ids[0]], [0.5, 0.5])


def test_disk_is_dihedrally_symmetric():
    g = generate(DomainSpec("disk", 0.5))
    pts = {tuple(p) for p in np.round(g.xy[g.domain_ids] / 0.5).astype(int).tolist()}
    for sx in (1, -1):
        for sy in (1, -1):
            for swap in (False, True):
                img = {((sy * y, sx * x) if swap else (sx * x, sy * y)) for x, y in pts}
                assert img == pts


def test_comb_teeth_are_three_components():
    spec = DomainSpec("comb", 0.02)
    g = generate(spec)
    teeth = g.domain & (g.xy[:, 1] > spec.corridor_width + spec.h / 2)
    assert len(path_components(g, teeth)) == 3


def test_generation_is_deterministic():
    spec = DomainSpec("slit-disk", 0.05)
    assert generate(spec).to_json() == generate(spec).to_json()


@pytest.mark.parametrize("h", [0.1, 0.05, 0.02, 0.01])
def test_square_measure_approaches_area(h):
    g = generate(DomainSpec("square", h))
    assert 1 - 8 * h <= g.measure(g.domain) <= 1 + 8 * h


@pytest.mark.parametrize("shape", ["square", "disk", "slit-disk", "comb"])
def test_boundary_vertices_touch_the_domain(shape):
    g = generate(DomainSpec(shape, 0.05))
    assert len(g.domain_ids) >= 1
    dom = g.xy[g.domain_ids]
    for b in g.boundary_ids:
        cheb = np.max(np.abs(dom - g.xy[b]), axis=1)
        assert cheb.min() <= g.h * (1 + 1e-9)
    # 4-neighbour edges of length h only
    assert np.all(g.lengths == g.h)


def test_invalid_specs_raise():
    with pytest.raises(GenerationError):
        DomainSpec("triangle", 0.1)
    with pytest.raises(GenerationError):
        DomainSpec("square", 0.0)
    with pytest.raises(GenerationError):
        generate(DomainSpec("square", 0.5, side=0.5))
    with pytest.raises(GenerationError):
        generate(DomainSpec("comb", 0.05, teeth=10, tooth_width=0.2))
