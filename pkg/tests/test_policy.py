import numpy as np
import pytest

from semnav.policy import (DarWeights, DecisionKind, LockMode, SceneCategory,
                           SciReading, compute_sci, dar_score, decide,
                           grid_diagonal, select_frontier, try_lock_target,
                           weights_from_sci)


def empty_maps(w=10, h=10):
    return (np.zeros((h, w), dtype=bool),      # smap_target
            np.zeros((h, w)),                  # cmap_target
            np.zeros((h, w), dtype=np.int16),  # smap_multi
            np.zeros((h, w)),                  # cmap_multi
            np.zeros((h, w), dtype=bool),      # explored
            np.zeros((h, w), dtype=bool))      # obstacle


class TestSci:
    def test_worked_fraction(self):
        smap = np.zeros((4, 4), dtype=np.int16)
        cmap = np.zeros((4, 4))
        cells = [(x, 0) for x in range(4)] + [(x, 1) for x in range(4)] + [(0, 2), (1, 2)]
        for (x, y) in cells[:4]:
            smap[y, x] = 1
            cmap[y, x] = 0.9
        sci = compute_sci(smap, cmap, set(cells))
        assert sci.value == pytest.approx(0.4)
        assert sci.category is SceneCategory.MODERATE

    def test_no_labels_sparse(self):
        smap = np.zeros((4, 4), dtype=np.int16)
        cmap = np.zeros((4, 4))
        sci = compute_sci(smap, cmap, {(0, 0), (1, 1)})
        assert sci.value == 0.0
        assert sci.category is SceneCategory.SPARSE

    def test_all_confident_dense(self):
        smap = np.ones((4, 4), dtype=np.int16)
        cmap = np.ones((4, 4))
        sci = compute_sci(smap, cmap, {(x, y) for x in range(4) for y in range(4)})
        assert sci.value == 1.0
        assert sci.category is SceneCategory.DENSE

    def test_confidence_threshold_is_strict(self):
        smap = np.ones((2, 2), dtype=np.int16)
        cmap = np.full((2, 2), 0.6)  # exactly at threshold: not counted
        sci = compute_sci(smap, cmap, {(0, 0), (1, 0), (0, 1), (1, 1)})
        assert sci.value == 0.0

    def test_category_boundaries(self):
        assert SciReading(0.3, None) or True  # categories come from helper
        from semnav.policy import categorize_sci
        assert categorize_sci(0.29) is SceneCategory.SPARSE
        assert categorize_sci(0.3) is SceneCategory.MODERATE
        assert categorize_sci(0.6) is SceneCategory.MODERATE
        assert categorize_sci(0.61) is SceneCategory.DENSE

    def test_empty_fov_rejected(self):
        smap = np.zeros((2, 2), dtype=np.int16)
        with pytest.raises(ValueError):
            compute_sci(smap, np.zeros((2, 2)), set())

    def test_array_pair_input(self):
        smap = np.ones((3, 3), dtype=np.int16)
        cmap = np.ones((3, 3))
        xs = np.array([0, 1, 2])
        ys = np.array([0, 0, 0])
        assert compute_sci(smap, cmap, (xs, ys)).value == 1.0


class TestWeights:
    def test_worked_example(self):
        w = weights_from_sci(SciReading(0.4, SceneCategory.MODERATE))
        assert (w.w_pred, w.w_vlm) == (0.6, 0.4)

    def test_extremes(self):
        assert weights_from_sci(SciReading(0.0, SceneCategory.SPARSE)) == DarWeights(1.0, 0.0)
        assert weights_from_sci(SciReading(1.0, SceneCategory.DENSE)) == DarWeights(0.0, 1.0)

    def test_simplex_holds_everywhere(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            v = float(rng.random())
            w = weights_from_sci(SciReading(v, SceneCategory.MODERATE))
            assert w.w_pred + w.w_vlm == 1.0
            assert 0.0 <= w.w_pred <= 1.0 and 0.0 <= w.w_vlm <= 1.0


class TestDarScore:
    def test_worked_example(self):
        w = DarWeights(0.6, 0.4)
        got = dar_score(1.0, 0.5, w, eps=1e-6)
        assert got == pytest.approx(0.6 / (1.0 + 1e-6) + 0.2, abs=1e-12)

    def test_pure_prediction_limit(self):
        w = DarWeights(1.0, 0.0)
        assert dar_score(0.0, 0.3, w, eps=1e-6) == pytest.approx(1e6)

    def test_pure_value_passthrough(self):
        w = DarWeights(0.0, 1.0)
        for d in (0.0, 0.4, 1.0):
            assert dar_score(d, 0.37, w) == pytest.approx(0.37)

    def test_monotone_in_d_and_v(self):
        w = DarWeights(0.5, 0.5)
        ds = np.linspace(0.01, 1.0, 50)
        scores = [dar_score(d, 0.5, w) for d in ds]
        assert all(a > b for a, b in zip(scores, scores[1:]))
        vs = np.linspace(0.0, 1.0, 50)
        scores = [dar_score(0.5, v, w) for v in vs]
        assert all(a < b for a, b in zip(scores, scores[1:]))


def brute_force_argmax(frontier, dmap, vsmooth, w, agent, eps=1e-6):
    h, wd = frontier.shape
    diag = grid_diagonal(wd, h)
    best = None
    best_key = None
    for y in range(h):
        for x in range(wd):
            if not frontier[y, x]:
                continue
            score = w.w_pred / (dmap[y, x] / diag + eps) + w.w_vlm * vsmooth[y, x]
            d2 = (x - agent[0]) ** 2 + (y - agent[1]) ** 2
            key = (-score, d2, y, x)
            if best_key is None or key < best_key:
                best_key = key
                best = (x, y)
    return best


class TestSelectFrontier:
    def test_single_frontier_wins_regardless(self):
        frontier = np.zeros((6, 6), dtype=bool)
        frontier[3, 4] = True
        out = select_frontier(frontier, np.ones((6, 6)) * 3.0,
                              np.zeros((6, 6)), DarWeights(0.5, 0.5), (0, 0))
        assert out[0] == (4, 3)

    def test_empty_frontier_returns_none(self):
        assert select_frontier(np.zeros((4, 4), dtype=bool), np.ones((4, 4)),
                               np.zeros((4, 4)), DarWeights(1, 0), (0, 0)) is None

    def test_nearer_to_prediction_wins_when_pred_weighted(self):
        frontier = np.zeros((8, 8), dtype=bool)
        frontier[0, 0] = True
        frontier[7, 7] = True
        dmap = np.ones((8, 8)) * 5.0
        dmap[7, 7] = 1.0
        out = select_frontier(frontier, dmap, np.zeros((8, 8)),
                              DarWeights(1.0, 0.0), (0, 0))
        assert out[0] == (7, 7)

    def test_tie_broken_by_agent_distance_then_row_major(self):
        frontier = np.zeros((8, 8), dtype=bool)
        frontier[1, 1] = True
        frontier[6, 6] = True
        out = select_frontier(frontier, np.full((8, 8), 2.0), np.zeros((8, 8)),
                              DarWeights(1.0, 0.0), (0, 0))
        assert out[0] == (1, 1)
        # symmetric candidates: row-major decides
        frontier = np.zeros((8, 8), dtype=bool)
        frontier[0, 4] = True
        frontier[4, 0] = True
        out = select_frontier(frontier, np.full((8, 8), 2.0), np.zeros((8, 8)),
                              DarWeights(1.0, 0.0), (0, 0))
        assert out[0] == (4, 0)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            frontier = rng.random((16, 16)) < 0.15
            if not frontier.any():
                frontier[3, 3] = True
            dmap = rng.random((16, 16)) * 20.0
            vsmooth = rng.random((16, 16))
            sci = float(rng.random())
            w = DarWeights(1.0 - sci, sci)
            agent = (int(rng.integers(0, 16)), int(rng.integers(0, 16)))
            got = select_frontier(frontier, dmap, vsmooth, w, agent)
            assert got[0] == brute_force_argmax(frontier, dmap, vsmooth, w, agent)


class TestTryLock:
    def test_below_threshold_returns_none(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        smap_t[3, 3] = True
        cmap_t[3, 3] = 0.7  # exactly at threshold: not enough
        assert try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                               obstacle, 2) is None

    def test_agreeing_cell_locks_at_itself(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        smap_t[3, 3] = True
        cmap_t[3, 3] = 0.9
        smap_m[3, 3] = 2
        cmap_m[3, 3] = 0.7
        explored[:, :] = True
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2)
        assert out == (3, 3)

    def test_fusion_region_empty_falls_back_to_target_argmax(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        smap_t[3, 3] = True
        cmap_t[3, 3] = 0.9
        smap_m[3, 3] = 5          # mislabeled in the multi map
        cmap_m[3, 3] = 0.8
        explored[:, :] = True
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2)
        assert out == (3, 3)

    def test_blocked_argmax_redirects_to_nearest_navigable(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        smap_t[3, 3] = True
        cmap_t[3, 3] = 0.95
        smap_m[3, 3] = 2
        cmap_m[3, 3] = 0.9
        explored[:, :] = True
        obstacle[2:5, 2:5] = True  # the lock cell sits inside an obstacle blob
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2)
        ox, oy = out
        assert not obstacle[oy, ox]
        assert explored[oy, ox]
        assert abs(ox - 3) <= 2 and abs(oy - 3) <= 2

    def test_fused_goal_uses_average_confidence_argmax(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        explored[:, :] = True
        # cell A: high single confidence, low multi; cell B: balanced higher avg
        smap_t[1, 1] = True; cmap_t[1, 1] = 0.95
        smap_m[1, 1] = 2;    cmap_m[1, 1] = 0.1   # avg 0.525
        smap_t[5, 5] = True; cmap_t[5, 5] = 0.8
        smap_m[5, 5] = 2;    cmap_m[5, 5] = 0.9   # avg 0.85
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2)
        assert out == (5, 5)

    def test_single_only_mode_ignores_multi_map(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        explored[:, :] = True
        smap_t[2, 2] = True
        cmap_t[2, 2] = 0.9
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2, mode=LockMode.SINGLE_ONLY)
        assert out == (2, 2)

    def test_multi_only_mode_uses_target_labels(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        explored[:, :] = True
        smap_m[4, 6] = 2
        cmap_m[4, 6] = 0.85
        out = try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                              obstacle, 2, mode=LockMode.MULTI_ONLY)
        assert out == (6, 4)
        assert try_lock_target(smap_t, cmap_t, smap_m, cmap_m, explored,
                               obstacle, 3, mode=LockMode.MULTI_ONLY) is None


class TestDecide:
    def test_lock_preempts_exploration(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        explored[:, :] = True
        frontier = np.zeros((10, 10), dtype=bool)
        frontier[0, 0] = True
        smap_t[5, 5] = True; cmap_t[5, 5] = 0.9
        smap_m[5, 5] = 2;    cmap_m[5, 5] = 0.8
        out = decide(frontier, np.ones((10, 10)), np.zeros((10, 10)),
                     smap_t, cmap_t, smap_m, cmap_m, explored, obstacle,
                     (0, 0), 2, fov_cells={(0, 0)})
        assert out.kind is DecisionKind.NAVIGATE
        assert out.cell == (5, 5)

    def test_fresh_map_explores_with_pure_prediction_weights(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        frontier = np.zeros((10, 10), dtype=bool)
        frontier[2, 2] = True
        out = decide(frontier, np.ones((10, 10)), np.zeros((10, 10)),
                     smap_t, cmap_t, smap_m, cmap_m, explored, obstacle,
                     (0, 0), 2, fov_cells={(0, 0)})
        assert out.kind is DecisionKind.EXPLORE
        assert (out.weights.w_pred, out.weights.w_vlm) == (1.0, 0.0)
        assert out.cell == (2, 2)

    def test_no_frontier_no_lock_stops(self):
        smap_t, cmap_t, smap_m, cmap_m, explored, obstacle = empty_maps()
        explored[:, :] = True
        out = decide(np.zeros((10, 10), dtype=bool), np.ones((10, 10)),
                     np.zeros((10, 10)), smap_t, cmap_t, smap_m, cmap_m,
                     explored, obstacle, (0, 0), 2, fov_cells={(0, 0)})
        assert out.kind is DecisionKind.STOP
        assert out.cell is None
