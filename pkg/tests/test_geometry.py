import math

import numpy as np
import pytest

from penaparab.exprlang import diff_refined, parse
from penaparab.geometry import (
    BoundaryPartition,
    GeometryError,
    MovingDomain,
    Segment,
    is_sigma0_cylindrical,
    lateral_point,
    validate_partition,
)

from conftest import D, R, expanding_domain, segments, static_domain, whole


def oracle_normal(domain, side, t):
    """Independent construction: rotate the curve tangent and pick the
    orientation pointing away from the domain interior."""
    if side == "left":
        slope = domain.a_slope(t)
        x = domain.a_at(t)
        inside_x = x + 1e-6 * (domain.b_at(t) - x)
    else:
        slope = domain.b_slope(t)
        x = domain.b_at(t)
        inside_x = x - 1e-6 * (x - domain.a_at(t))
    tangent = np.array([slope, 1.0])
    candidate = np.array([tangent[1], -tangent[0]])  # rotate by -90 degrees
    candidate /= np.linalg.norm(candidate)
    to_inside = np.array([inside_x - x, 0.0])
    if np.dot(candidate, to_inside) > 0:
        candidate = -candidate
    return candidate


def test_static_lateral_points():
    dom = static_domain()
    for t in (0.0, 0.3, 1.0):
        lp = lateral_point(dom, "left", t)
        assert lp.cos_nu_t == 0.0
        assert (lp.nu_x, lp.nu_t) == (-1.0, 0.0)
        assert lp.w_sigma == 1.0
        assert lp.n == -1
        rp = lateral_point(dom, "right", t)
        assert (rp.nu_x, rp.nu_t) == (1.0, 0.0)
        assert rp.n == 1


def test_expanding_right_normal_against_oracle():
    # b(t) = 1 + t: nu = (1, -1)/sqrt(2), cos = -1/sqrt(2), w_sigma = sqrt(2)
    dom = MovingDomain(parse("0", {"t"}), parse("1+t", {"t"}), 1.0, 1.5, 0.5)
    for t in (0.0, 0.5, 1.0):
        lp = lateral_point(dom, "right", t)
        assert lp.nu_x == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert lp.cos_nu_t == pytest.approx(-1 / math.sqrt(2), abs=1e-9)
        assert lp.w_sigma == pytest.approx(math.sqrt(2), abs=1e-9)
        nu = oracle_normal(dom, "right", t)
        assert np.allclose([lp.nu_x, lp.nu_t], nu, atol=1e-9)
        # cross-check cos * w_sigma = -b'(t) = -1
        assert lp.cos_nu_t * lp.w_sigma == pytest.approx(-1.0, abs=1e-9)


def test_shrinking_left_normal_against_oracle():
    # a(t) = -t: left cos = -1/sqrt(2), cos * w_sigma = a'(t) = -1
    dom = MovingDomain(parse("-t", {"t"}), parse("1", {"t"}), 1.0, 1.5, 0.5)
    for t in (0.0, 0.25, 1.0):
        lp = lateral_point(dom, "left", t)
        assert lp.cos_nu_t == pytest.approx(-1 / math.sqrt(2), abs=1e-9)
        nu = oracle_normal(dom, "left", t)
        assert np.allclose([lp.nu_x, lp.nu_t], nu, atol=1e-9)
        assert lp.cos_nu_t * lp.w_sigma == pytest.approx(-1.0, abs=1e-9)


def test_normal_identities_on_samples():
    dom = MovingDomain(
        parse("-t/4", {"t"}), parse("1 + sin(t)/3", {"t"}), 1.0, 1.0, 0.5
    )
    for side, curve in (("left", dom.a), ("right", dom.b)):
        for t in np.linspace(0.0, 1.0, 33):
            lp = lateral_point(dom, side, float(t))
            assert lp.nu_x**2 + lp.nu_t**2 == pytest.approx(1.0, abs=1e-14)
            slope = diff_refined(curve, "t", {"t": float(t)})
            signed = slope if side == "left" else -slope
            assert lp.cos_nu_t * lp.w_sigma == pytest.approx(signed, abs=1e-8)
            assert abs(lp.nu_x) >= 1.0 / math.sqrt(1.0 + dom.slope_max**2) - 1e-12


def test_lateral_point_rejects_steep_slope():
    dom = MovingDomain(parse("0", {"t"}), parse("1+2*t", {"t"}), 1.0, 1.0, 0.5)
    with pytest.raises(GeometryError, match="slope"):
        lateral_point(dom, "right", 0.5)


def test_lateral_point_rejects_out_of_range_time():
    dom = static_domain()
    with pytest.raises(GeometryError, match="outside"):
        lateral_point(dom, "left", 2.0)


def test_domain_check_flags_width_and_slope():
    thin = MovingDomain(parse("0", {"t"}), parse("1-t", {"t"}), 1.0, 2.0, 0.5)
    problems = thin.check(n=512)
    assert any("width" in p for p in problems)
    steep = MovingDomain(parse("0", {"t"}), parse("1+2*t", {"t"}), 1.0, 1.0, 0.5)
    assert any("slope" in p for p in steep.check(n=512))
    assert static_domain().check(n=512) == []


def test_validate_partition_simple_ok():
    dom = static_domain()
    part = BoundaryPartition(left=whole(D), right=whole(R))
    assert validate_partition(dom, part).ok


def test_validate_partition_overlapping_switch_ok():
    # left Dirichlet on (0, 0.5), right Dirichlet on (0.4, 1): covered
    dom = static_domain()
    part = BoundaryPartition(
        left=segments((0.0, 0.5, D), (0.5, 1.0, R)),
        right=segments((0.0, 0.4, R), (0.4, 1.0, D)),
    )
    report = validate_partition(dom, part)
    assert report.ok
    # brute-force oracle on a 10^4 point grid
    for t in np.linspace(0.0, 1.0, 10_000):
        has_dirichlet = (t <= 0.5) or (t >= 0.4)
        assert has_dirichlet


def test_validate_partition_gap_detected():
    dom = static_domain()
    part = BoundaryPartition(
        left=segments((0.0, 0.5, D), (0.5, 1.0, R)),
        right=whole(R),
    )
    report = validate_partition(dom, part)
    assert not report.ok
    (gap,) = report.gaps
    assert gap == pytest.approx((0.5, 1.0))


def test_validate_partition_structural_errors():
    dom = static_domain()
    missing_tail = BoundaryPartition(
        left=segments((0.0, 0.4, D)), right=whole(R)
    )
    report = validate_partition(dom, missing_tail)
    assert not report.ok
    assert any("coverage ends" in p for p in report.problems)


def test_validate_partition_monotone_in_dirichlet():
    # adding a Dirichlet segment never turns ok into violation
    rng = np.random.default_rng(7)
    dom = static_domain()
    for _ in range(20):
        split = float(rng.uniform(0.2, 0.8))
        kinds = [D if rng.random() < 0.5 else R for _ in range(3)]
        part = BoundaryPartition(
            left=segments((0.0, split, kinds[0]), (split, 1.0, kinds[1])),
            right=segments((0.0, 1.0, kinds[2])),
        )
        before = validate_partition(dom, part).ok
        promoted = BoundaryPartition(
            left=part.left,
            right=segments((0.0, 1.0, D)),
        )
        after = validate_partition(dom, promoted).ok
        if before:
            assert after


@pytest.mark.parametrize(
    "left,right,expected",
    [
        (whole(D), whole(R), True),
        (whole(D), whole(D), True),
        (whole(R), whole(R), False),
        (segments((0.0, 0.5, D), (0.5, 1.0, R)), whole(D), False),
        (segments((0.0, 0.5, D), (0.5, 1.0, D)), whole(R), True),
    ],
)
def test_is_sigma0_cylindrical(left, right, expected):
    part = BoundaryPartition(left=left, right=right)
    assert is_sigma0_cylindrical(part) is expected


def test_expanding_domain_passes_checks():
    assert expanding_domain().check(n=1024) == []
