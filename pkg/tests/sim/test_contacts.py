"""Test the :mod:`granulab.core.sim.broadphase` and :mod:`granulab.core.sim.contacts` modules."""
import numpy as np
import pytest

from granulab.core.models.grain import FUNNEL_ID, GROUND_ID, FunnelSpec
from granulab.core.sim.broadphase import find_pairs
from granulab.core.sim.contacts import build_contacts, current_gap, funnel_gap

RADIUS = 0.002
PROFILE = FunnelSpec().profile()


class TestFindPairs:
    """Test the :func:`granulab.core.sim.broadphase.find_pairs` function."""

    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_brute_force(self, seed: int) -> None:
        """Test that the hashed grid finds exactly the pairs a brute-force scan finds."""
        rng = np.random.default_rng(seed)
        positions = rng.uniform(-0.03, 0.03, size=(300, 3))
        reach = 0.005
        pair_i, pair_j = find_pairs(positions, reach)
        found = set(zip(pair_i.tolist(), pair_j.tolist()))
        d = np.linalg.norm(positions[:, None] - positions[None], axis=-1)
        expected = {(i, j) for i in range(300) for j in range(i + 1, 300) if d[i, j] < reach}
        assert found == expected
        assert len(found) == len(pair_i)

    def test_sorted_by_first(self) -> None:
        """Test that pairs come in ascending order of their first grain."""
        rng = np.random.default_rng(4)
        pair_i, pair_j = find_pairs(rng.uniform(0, 0.02, size=(100, 3)), 0.006)
        assert np.all(np.diff(pair_i) >= 0)
        assert np.all(pair_i < pair_j)

    def test_negative_coordinates(self) -> None:
        """Test pairs straddling the origin, where cell indices change sign."""
        positions = np.array([[-0.001, -0.001, -0.001], [0.001, 0.001, 0.001]])
        pair_i, pair_j = find_pairs(positions, 0.004)
        assert pair_i.tolist() == [0] and pair_j.tolist() == [1]

    def test_empty(self) -> None:
        """Test that no grains give no pairs."""
        pair_i, _ = find_pairs(np.zeros((0, 3)), 0.004)
        assert len(pair_i) == 0


class TestFunnelGap:
    """Test the :func:`granulab.core.sim.contacts.funnel_gap` function."""

    def test_inside_spout(self) -> None:
        """Test a grain on the axis of the spout."""
        gap, nx, ny, nz = funnel_gap(0.0, 0.0, 0.13, RADIUS, PROFILE)
        assert gap == pytest.approx(0.01 - RADIUS)
        assert (nx, ny, nz) == pytest.approx((-1.0, 0.0, 0.0))

    def test_against_wall(self) -> None:
        """Test that the normal points from the spout wall to the grain."""
        gap, nx, ny, nz = funnel_gap(0.0, 0.0075, 0.13, RADIUS, PROFILE)
        assert gap == pytest.approx(0.0025 - RADIUS)
        assert (nx, ny, nz) == pytest.approx((0.0, -1.0, 0.0))

    def test_cone(self) -> None:
        """Test a grain resting against the inside of the cone."""
        # Point on the cone wall halfway up, then moved inwards along its normal.
        wall = np.array([0.035, 0.19])
        along = np.array([0.05, 0.10]) / np.hypot(0.05, 0.10)
        inward = np.array([-along[1], along[0]])
        centre = wall + 0.003 * inward
        gap, nx, _, nz = funnel_gap(centre[0], 0.0, centre[1], RADIUS, PROFILE)
        assert gap == pytest.approx(0.001)
        assert (nx, nz) == pytest.approx(tuple(inward))


class TestBuildContacts:
    """Test the :func:`granulab.core.sim.contacts.build_contacts` function."""

    def test_order(self) -> None:
        """Test the ground-funnel-pairs order of the contacts of each grain."""
        positions = np.array([[0.0, 0.0, RADIUS], [0.0, 0.0, 3 * RADIUS],
                              [0.0, 0.0, 0.5]])
        velocities = np.zeros_like(positions)
        body_i, body_j, normal, gap = build_contacts(positions, velocities, RADIUS,
                                                     0.5 * RADIUS, 1e-3, False, PROFILE)
        assert list(zip(body_i.tolist(), body_j.tolist())) == \
            [(0, GROUND_ID), (0, 1)]
        assert gap == pytest.approx([0.0, 0.0], abs=1e-15)
        assert normal[1] == pytest.approx([0.0, 0.0, -1.0])

    def test_speculative_ground(self) -> None:
        """Test that a fast grain gets a ground contact before it reaches the margin."""
        positions = np.array([[0.0, 0.0, RADIUS + 0.004]])
        slow = build_contacts(positions, np.zeros((1, 3)), RADIUS, 0.001, 1e-3, False, PROFILE)
        fast = build_contacts(positions, np.array([[0.0, 0.0, -5.0]]), RADIUS, 0.001, 1e-3,
                              False, PROFILE)
        assert len(slow[0]) == 0
        assert fast[1].tolist() == [GROUND_ID]

    def test_funnel(self) -> None:
        """Test that a grain near the spout wall gets a funnel contact."""
        positions = np.array([[0.0075, 0.0, 0.13]])
        _, body_j, _, gap = build_contacts(positions, np.zeros((1, 3)), RADIUS, 0.001, 1e-3,
                                           True, PROFILE)
        assert body_j.tolist() == [FUNNEL_ID]
        assert gap[0] == pytest.approx(0.0005)


class TestCurrentGap:
    """Test the :func:`granulab.core.sim.contacts.current_gap` function."""

    def test_pair(self) -> None:
        """Test the gap and normal of two overlapping grains."""
        positions = np.array([[0.0, 0.0, 0.0], [0.003, 0.0, 0.0]])
        gap, nx, ny, nz = current_gap(positions, 1, 0, RADIUS, PROFILE)
        assert gap == pytest.approx(-0.001)
        assert (nx, ny, nz) == pytest.approx((1.0, 0.0, 0.0))

    def test_ground(self) -> None:
        """Test the gap against the ground plane."""
        positions = np.array([[0.1, 0.2, 0.0015]])
        gap, _, _, nz = current_gap(positions, 0, GROUND_ID, RADIUS, PROFILE)
        assert gap == pytest.approx(-0.0005)
        assert nz == 1.0
