import logging
import math

import numpy as np
import pytest

from optimized_flooding import Point, Region, forward_candidates, hex_vertices, ideal_lattice, nearest_strategic
from optimized_flooding.exceptions import DegenerateGeometry, OutOfRange
from optimized_flooding.geometry import GEOMETRIC_EPSILON, ORIGIN, outward_candidate

logger = logging.getLogger("test")

R = 300.0
TOL = GEOMETRIC_EPSILON * R


def angle_between(a: Point, b: Point, c: Point) -> float:
    # angle at a between a->b and a->c, degrees
    v1 = (b.x - a.x, b.y - a.y)
    v2 = (c.x - a.x, c.y - a.y)
    cos = (v1[0] * v2[0] + v1[1] * v2[1]) / (math.hypot(*v1) * math.hypot(*v2))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


def test_point():
    assert Point(3, 4).distance_to(ORIGIN) == 5
    assert Point(1, 2).translated(1, 1) == Point(2, 3)
    with pytest.raises(OutOfRange):
        Point(math.nan, 0)
    with pytest.raises(OutOfRange):
        Point(0, math.inf)


def test_region():
    circle = Region.circle(600.0)
    assert circle.contains(Point(600, 0))
    assert not circle.contains(Point(601, 0))
    assert circle.contains(Point(601, 0), margin=2.0)
    assert circle.area == pytest.approx(math.pi * 600**2)

    rect = Region.rectangle(1800.0, 1200.0)
    assert rect.center == Point(900, 600)
    assert rect.bounds == (0, 0, 1800, 1200)
    assert rect.area == 1800 * 1200
    assert rect.contains(Point(0, 1200))
    assert not rect.contains(Point(-1, 600))

    with pytest.raises(OutOfRange):
        Region.circle(0)
    with pytest.raises(OutOfRange):
        Region.rectangle(100, -1)


def test_hex_vertices():
    vertices = hex_vertices(ORIGIN, 1.0)
    expected = [(1, 0), (0.5, 0.8660), (-0.5, 0.8660), (-1, 0), (-0.5, -0.8660), (0.5, -0.8660)]
    for vertex, (x, y) in zip(vertices, expected):
        assert vertex.x == pytest.approx(x, abs=1e-4)
        assert vertex.y == pytest.approx(y, abs=1e-4)

    vertices = hex_vertices(Point(300, 300), R)
    assert vertices[0].x == pytest.approx(600)
    assert vertices[0].y == pytest.approx(300)
    for i, vertex in enumerate(vertices):
        assert vertex.distance_to(Point(300, 300)) == pytest.approx(R, abs=TOL)
        assert vertex.distance_to(vertices[(i + 1) % 6]) == pytest.approx(R, abs=TOL)

    with pytest.raises(OutOfRange):
        hex_vertices(ORIGIN, 0)


def test_forward_candidates():
    first, second = forward_candidates(Point(0, 0), Point(300, 0), R)
    assert (first.x, first.y) == pytest.approx((450, -259.81), abs=0.01)
    assert (second.x, second.y) == pytest.approx((450, 259.81), abs=0.01)

    out = forward_candidates(Point(0, 0), Point(0, 300), R)
    assert {(round(p.x, 2), round(p.y, 2)) for p in out} == {(259.81, 450), (-259.81, 450)}

    L1, L2 = Point(12.5, -40.0), Point(250.0, 170.0)
    a, b = forward_candidates(L1, L2, R)
    assert a.distance_to(L2) == pytest.approx(R, abs=TOL)
    assert b.distance_to(L2) == pytest.approx(R, abs=TOL)
    assert angle_between(L2, L1, a) == pytest.approx(120, abs=1e-6)
    assert angle_between(L2, L1, b) == pytest.approx(120, abs=1e-6)
    assert angle_between(L2, a, b) == pytest.approx(120, abs=1e-6)

    with pytest.raises(DegenerateGeometry):
        forward_candidates(Point(10, 10), Point(10, 10), R)


def test_nearest_strategic():
    candidate = nearest_strategic(Point(450, 250), Point(0, 0), Point(300, 0), ORIGIN, False, R)
    assert candidate.location.y == pytest.approx(259.81, abs=0.01)
    assert candidate.distance_from_node == pytest.approx(9.81, abs=0.01)

    at_vertex = nearest_strategic(Point(450, 259.8076211353316), Point(0, 0), Point(300, 0), ORIGIN, False, R)
    assert at_vertex.distance_from_node == pytest.approx(0, abs=TOL)

    from_source = nearest_strategic(Point(290, 10), ORIGIN, ORIGIN, ORIGIN, True, R)
    assert (from_source.location.x, from_source.location.y) == pytest.approx((300, 0), abs=1e-9)
    assert from_source.distance_from_node == pytest.approx(math.sqrt(200), abs=1e-3)

    # equidistant from both forward candidates: first in list order wins
    tie = nearest_strategic(Point(450, 0), Point(0, 0), Point(300, 0), ORIGIN, False, R)
    assert tie.location.y < 0

    with pytest.raises(DegenerateGeometry):
        nearest_strategic(Point(1, 1), Point(5, 5), Point(5, 5), ORIGIN, False, R)


def test_ideal_lattice_first_ring():
    points = ideal_lattice(Region.circle(2 * R), ORIGIN, R)
    assert points[0] == ORIGIN
    ring = [p for p in points if p.distance_to(ORIGIN) == pytest.approx(R, abs=TOL)]
    assert len(ring) == 6
    for vertex in hex_vertices(ORIGIN, R):
        assert any(vertex.distance_to(p) < TOL for p in ring)


def test_ideal_lattice_spacing():
    points = ideal_lattice(Region.rectangle(6 * R, 6 * R), Point(3 * R, 3 * R), R)
    for i, p in enumerate(points):
        nearest = min(p.distance_to(q) for j, q in enumerate(points) if j != i)
        assert nearest >= R - TOL


@pytest.mark.parametrize(
    "radius,count",
    [(2, 13), (3, 25), (4, 43), (5, 61), (7, 127)],
)
def test_ideal_lattice_circle_sizes(radius, count):
    # source plus its retransmitting nodes
    assert len(ideal_lattice(Region.circle(radius * R), ORIGIN, R, margin=0.0)) == count


def test_ideal_lattice_margin():
    region = Region.rectangle(4 * R, 4 * R)
    inner = ideal_lattice(region, region.center, R, margin=0.0)
    outer = ideal_lattice(region, region.center, R)
    assert len(outer) > len(inner)
    assert set(inner) <= set(outer)
    assert outer == ideal_lattice(region, region.center, R, margin=R)
    # vertices within R of the boundary, none farther
    for p in outer:
        assert region.contains(p, margin=R + TOL)

    # a 2R circle grown by R holds the 3R circle lattice
    assert len(ideal_lattice(Region.circle(2 * R), ORIGIN, R)) == 25


def test_ideal_lattice_errors():
    with pytest.raises(OutOfRange):
        ideal_lattice(Region.circle(2 * R), Point(5 * R, 0), R)
    with pytest.raises(OutOfRange):
        ideal_lattice(Region.circle(2 * R), ORIGIN, -1)
    with pytest.raises(OutOfRange):
        ideal_lattice(Region.circle(2 * R), ORIGIN, R, margin=-1)


def test_outward_candidate():
    out = outward_candidate(ORIGIN, Point(300, 0), R)
    assert (out.x, out.y) == pytest.approx((600, 0))
    # skewed relay: step R along the source -> relay direction
    out = outward_candidate(ORIGIN, Point(0, 250), R)
    assert (out.x, out.y) == pytest.approx((0, 550))
    with pytest.raises(DegenerateGeometry):
        outward_candidate(Point(10, 10), Point(10, 10), R)


def test_candidates_close_on_lattice():
    # every location generated hop by hop from the source hexagon is a lattice vertex
    source = Point(1234.5, -987.25)
    lattice = np.array([p.as_tuple() for p in ideal_lattice(Region.circle(8 * R, source), source, R, margin=0.0)])

    def on_lattice(p: Point) -> bool:
        return float(np.min(np.hypot(lattice[:, 0] - p.x, lattice[:, 1] - p.y))) <= TOL

    ring = hex_vertices(source, R)
    edges = [(source, v) for v in ring]
    generated = 0
    for depth in range(5):
        following = []
        for L1, L2 in edges:
            nexts = [outward_candidate(L1, L2, R)] if depth == 0 else forward_candidates(L1, L2, R)
            if depth == 0:
                # the other ring neighbours are lattice neighbours too
                nexts += forward_candidates(ring[(ring.index(L2) + 1) % 6], L2, R)
            for p in nexts:
                assert p.distance_to(L2) == pytest.approx(R, abs=TOL)
                assert on_lattice(p)
                generated += 1
                following.append((L2, p))
        edges = following
    assert all(on_lattice(v) for v in ring)
    logger.info(f"{generated} generated locations checked")


def test_forward_candidates_move_with_the_pair():
    rng = np.random.default_rng(21)
    for _ in range(200):
        x1, y1, x2, y2, dx, dy = rng.uniform(-2000, 2000, size=6)
        theta = rng.uniform(0, 2 * math.pi)
        L1, L2 = Point(x1, y1), Point(x2, y2)
        if L1.distance_to(L2) < 1.0:
            continue
        base = forward_candidates(L1, L2, R)

        moved = forward_candidates(L1.translated(dx, dy), L2.translated(dx, dy), R)
        for p, q in zip(base, moved):
            assert (q.x, q.y) == pytest.approx((p.x + dx, p.y + dy), abs=TOL)

        def turn(p: Point) -> Point:
            c, s = math.cos(theta), math.sin(theta)
            vx, vy = p.x - L2.x, p.y - L2.y
            return Point(L2.x + c * vx - s * vy, L2.y + s * vx + c * vy)

        turned = forward_candidates(turn(L1), L2, R)
        for p, q in zip(base, turned):
            expected = turn(p)
            assert (q.x, q.y) == pytest.approx((expected.x, expected.y), abs=TOL)


@pytest.mark.parametrize("stage", ["source", "source_neighbor", "relay"])
def test_nearest_strategic_is_argmin(stage):
    rng = np.random.default_rng(5)
    for _ in range(300):
        x1, y1, x2, y2, nx, ny = rng.uniform(-900, 900, size=6)
        L1, L2, node = Point(x1, y1), Point(x2, y2), Point(nx, ny)
        if stage == "source":
            candidates = hex_vertices(L2, R)
            best = nearest_strategic(node, L2, L2, L2, True, R)
        elif stage == "source_neighbor":
            candidates = [outward_candidate(L1, L2, R)]
            best = nearest_strategic(node, L1, L2, L1, False, R, from_source_neighbor=True)
        else:
            candidates = forward_candidates(L1, L2, R)
            best = nearest_strategic(node, L1, L2, L1, False, R)
        distances = [node.distance_to(c) for c in candidates]
        assert best.distance_from_node == min(distances)
        assert best.location == candidates[distances.index(min(distances))]
