"""Smoke tests for the python module: encode/decode round-trip, census,
metrics. Run with PYTHONPATH pointing at the built package."""

import numpy as np

import ccv


def make_video(n=2, h=16, w=16, seed=0):
    rng = np.random.default_rng(seed)
    base_y = rng.integers(40, 215, size=(h, w), dtype=np.uint8)
    y = np.stack([np.roll(base_y, i, axis=1) for i in range(n)])
    u = np.full((n, h // 2, w // 2), 96, dtype=np.uint8)
    v = np.full((n, h // 2, w // 2), 160, dtype=np.uint8)
    return y, u, v


def test_complexity_census():
    c = ccv.complexity("B", 1920, 1080)
    assert c["params_total"] == 807
    assert c["params_arm"] == 338
    assert c["params_upsampling"] == 64
    assert c["params_synthesis"] == 405
    assert 880 <= c["per_pixel_total"] <= 960
    assert ccv.complexity("I", 1920, 1080)["params_synthesis"] == 213


def test_plan_gop():
    plans = ccv.plan_gop(5, "ra", 4)
    assert [p["display_index"] for p in plans] == [0, 4, 2, 1, 3]
    assert plans[0]["type"] == "I"
    assert plans[1]["type"] == "P"
    assert plans[2]["ref1"] == 0 and plans[2]["ref2"] == 4


def test_encode_decode_roundtrip():
    y, u, v = make_video()
    stream, summary = ccv.encode(
        y, u, v, lam=0.004, gop="ldp", seed=1,
        iters_main=60, iters_ste=15, iters_net=10,
    )
    assert isinstance(stream, bytes)
    assert stream[:4] == b"CCV1"
    assert summary["stream_bytes"] == len(stream)

    dy, du, dv, info = ccv.decode(stream)
    assert info["width"] == 16 and info["height"] == 16
    assert dy.shape == y.shape and du.shape == u.shape
    assert info["macs_per_pixel_mean"] < 1000

    psnr = ccv.psnr_420(y, u, v, dy, du, dv)
    assert abs(psnr - summary["psnr_db"]) < 0.5  # sequence PSNR in the same ballpark
    assert psnr > 10


def test_determinism():
    y, u, v = make_video(seed=3)
    kwargs = dict(lam=0.002, gop="intra", seed=9, iters_main=40, iters_ste=10, iters_net=5)
    s1, _ = ccv.encode(y, u, v, **kwargs)
    s2, _ = ccv.encode(y, u, v, **kwargs)
    assert s1 == s2


def test_bd_rate():
    a = [(0.5, 30.0), (1.0, 33.0), (2.0, 36.0), (4.0, 39.0)]
    b = [(r * 2, p) for r, p in a]
    assert abs(ccv.bd_rate(a, b) - 100.0) < 1e-6


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
                print(f"[PASS] {name}")
            except Exception as e:  # noqa: BLE001
                failures += 1
                print(f"[FAIL] {name}: {e}")
    raise SystemExit(1 if failures else 0)
