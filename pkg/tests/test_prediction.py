import json
import socket
import socketserver
import threading

import numpy as np
import pytest

from semnav.prediction import (CooccurrencePrior, PredictedTargets,
                               ProtocolError, decode_predict_request,
                               decode_predict_response, distance_map,
                               encode_predict_request, encode_predict_response,
                               map_center, predict_targets, remote_predict)

NAMES = ["", "bed", "sofa", "toilet"]


def flat_prior(weights=None):
    aff = {}
    for (a, b), w in (weights or {}).items():
        aff[frozenset((a, b))] = w
    return CooccurrencePrior(aff, default=0.05, self_affinity=1.0)


def brute_min_distance(points, w, h):
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = min(((x - px) ** 2 + (y - py) ** 2) ** 0.5
                            for px, py in points)
    return out


class TestPredictTargets:
    def test_empty_map_returns_center(self):
        smap = np.zeros((10, 8), dtype=np.int16)
        cmap = np.zeros((10, 8))
        out = predict_targets(smap, cmap, 3, flat_prior(), NAMES)
        assert out.points == [map_center(8, 10)]

    def test_single_cluster_centroid(self):
        smap = np.zeros((10, 10), dtype=np.int16)
        cmap = np.zeros((10, 10))
        for (x, y) in [(2, 3), (3, 3), (2, 4), (3, 4)]:
            smap[y, x] = 1
            cmap[y, x] = 0.9
        out = predict_targets(smap, cmap, 3, flat_prior({("toilet", "bed"): 0.5}),
                              NAMES, n_targets=3)
        assert out.points[0] == (3, 4)  # mean 2.5 rounds half-away to 3

    def test_higher_prior_cluster_ranks_first(self):
        smap = np.zeros((12, 12), dtype=np.int16)
        cmap = np.zeros((12, 12))
        smap[2, 2] = 1   # bed cluster
        cmap[2, 2] = 0.8
        smap[9, 9] = 2   # sofa cluster
        cmap[9, 9] = 0.8
        prior = flat_prior({("toilet", "bed"): 1.0, ("toilet", "sofa"): 0.1})
        out = predict_targets(smap, cmap, 3, prior, NAMES, n_targets=2)
        assert out.points == [(2, 2), (9, 9)]

    def test_self_affinity_anchors_on_target_cluster(self):
        smap = np.zeros((8, 8), dtype=np.int16)
        cmap = np.zeros((8, 8))
        smap[1, 1] = 3
        cmap[1, 1] = 0.5
        out = predict_targets(smap, cmap, 3, flat_prior(), NAMES)
        assert out.points[0] == (1, 1)

    def test_zero_affinity_clusters_are_not_evidence(self):
        smap = np.zeros((8, 8), dtype=np.int16)
        cmap = np.zeros((8, 8))
        smap[1, 1] = 1
        cmap[1, 1] = 0.9
        prior = CooccurrencePrior({}, default=0.0)
        out = predict_targets(smap, cmap, 3, prior, NAMES)
        assert out.points == [map_center(8, 8)]

    def test_pure_function_of_maps(self):
        rng = np.random.default_rng(0)
        smap = rng.integers(0, 4, size=(9, 9)).astype(np.int16)
        cmap = np.where(smap > 0, rng.random((9, 9)), 0.0)
        a = predict_targets(smap, cmap, 3, flat_prior(), NAMES)
        b = predict_targets(smap.copy(), cmap.copy(), 3, flat_prior(), NAMES)
        assert a.points == b.points


class TestDistanceMap:
    def test_worked_three_four_five(self):
        d = distance_map(PredictedTargets([(0, 0)]), (8, 8))
        assert d.grid[4, 3] == pytest.approx(5.0)

    def test_zero_at_target(self):
        d = distance_map(PredictedTargets([(2, 5)]), (8, 8))
        assert d.grid[5, 2] == 0.0

    def test_min_over_targets(self):
        d = distance_map(PredictedTargets([(0, 0), (10, 0)]), (12, 4))
        assert d.grid[0, 6] == pytest.approx(4.0)

    def test_empty_points_rejected(self):
        with pytest.raises(ValueError):
            distance_map(PredictedTargets([]), (4, 4))

    def test_matches_brute_force_and_lipschitz(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(1, 4))
            pts = [(int(rng.integers(0, 12)), int(rng.integers(0, 10)))
                   for _ in range(n)]
            d = distance_map(PredictedTargets(pts), (12, 10)).grid
            assert np.allclose(d, brute_min_distance(pts, 12, 10))
            assert (d >= 0).all()
            # 1-Lipschitz along both axes
            assert (np.abs(np.diff(d, axis=0)) <= 1.0 + 1e-9).all()
            assert (np.abs(np.diff(d, axis=1)) <= 1.0 + 1e-9).all()


class TestWire:
    def test_round_trip_identity_on_quantized_maps(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            smap = rng.integers(0, 5, size=(h, w)).astype(np.int16)
            cmap = rng.integers(0, 1001, size=(h, w)).astype(np.float64) / 1000.0
            line = encode_predict_request(smap, cmap, 4)
            w2, h2, tc, smap2, cmap2 = decode_predict_request(line)
            assert (w2, h2, tc) == (w, h, 4)
            assert (smap2 == smap).all()
            assert np.allclose(cmap2, cmap, atol=1e-12)

    def test_response_round_trip_and_clamping(self):
        line = encode_predict_response([(3, 4), (99, -2)])
        pts = decode_predict_response(line, 10, 10)
        assert pts == [(3, 4), (9, 0)]

    def test_malformed_request_rejected(self):
        with pytest.raises(ProtocolError):
            decode_predict_request("not json")
        with pytest.raises(ProtocolError):
            decode_predict_request(json.dumps({"v": 2, "w": 1, "h": 1,
                                               "target_class": 1,
                                               "smap": [0], "cmap": [0]}))
        with pytest.raises(ProtocolError):
            decode_predict_request(json.dumps({"v": 1, "w": 2, "h": 2,
                                               "target_class": 1,
                                               "smap": [0], "cmap": [0]}))

    def test_malformed_response_rejected(self):
        with pytest.raises(ProtocolError):
            decode_predict_response(json.dumps({"v": 1, "points": []}), 4, 4)
        with pytest.raises(ProtocolError):
            decode_predict_response("{}", 4, 4)


class _FixedPointHandler(socketserver.StreamRequestHandler):
    def handle(self):
        line = self.rfile.readline().decode("utf-8")
        decode_predict_request(line)  # validates
        self.wfile.write((encode_predict_response([(5, 6)]) + "\n").encode())


@pytest.fixture()
def stub_server():
    server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _FixedPointHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


class TestRemotePredict:
    def test_loopback_stub_returns_fixed_point(self, stub_server):
        smap = np.zeros((8, 8), dtype=np.int16)
        cmap = np.zeros((8, 8))
        out = remote_predict(smap, cmap, 1, stub_server, flat_prior(), NAMES)
        assert out.points == [(5, 6)]

    def test_unreachable_endpoint_falls_back_to_heuristic(self):
        # grab a free port and close it so nothing listens there
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        smap = np.zeros((8, 8), dtype=np.int16)
        cmap = np.zeros((8, 8))
        notes = []
        out = remote_predict(smap, cmap, 1, f"127.0.0.1:{port}", flat_prior(),
                             NAMES, timeout_s=0.2, on_fallback=notes.append)
        assert out.points == [map_center(8, 8)]
        assert len(notes) == 1
