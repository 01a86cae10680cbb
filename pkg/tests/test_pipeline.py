"""Preprocessing ops against hand-computed and loop-oracle references."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from edgegaze.pgm import PGMError, read_pgm, write_pgm
from edgegaze.pipeline import (
    FaceBox,
    NoFaceFound,
    crop_with_margin,
    css_to_cm,
    detect_face,
    map_coords_to_frames,
    normalize,
    preprocess,
    resize_bilinear,
    to_greyscale,
)
from edgegaze.recording import DEVICE_PRESETS, DeviceProfile, ManifestError, load_recording
from edgegaze.synth import RenderParams, gen_dataset, render_gaze_frame


def test_greyscale_extremes():
    white = np.full((2, 2, 3), 255, dtype=np.uint8)
    black = np.zeros((2, 2, 3), dtype=np.uint8)
    npt.assert_array_equal(to_greyscale(white), np.full((2, 2), 255))
    npt.assert_array_equal(to_greyscale(black), np.zeros((2, 2)))


def test_greyscale_bt601_red():
    red = np.zeros((1, 1, 3), dtype=np.uint8)
    red[..., 0] = 255
    # 0.299 * 255 = 76.245, round-half-up -> 76
    assert to_greyscale(red)[0, 0] == 76


def test_greyscale_round_half_up():
    # 0.299*5 + 0.587*0 + 0.114*0 = 1.495 -> 1;  0.299*5 + 0.114*30 = 4.915 -> 5
    px = np.array([[[5, 0, 0], [5, 0, 30]]], dtype=np.uint8)
    npt.assert_array_equal(to_greyscale(px), [[1, 5]])


def test_greyscale_passthrough_for_grey():
    grey = np.arange(6, dtype=np.uint8).reshape(2, 3)
    npt.assert_array_equal(to_greyscale(grey), grey)


def bilinear_oracle(img, oh, ow):
    h, w = img.shape
    out = np.zeros((oh, ow))
    for i in range(oh):
        for j in range(ow):
            sy = min(max((i + 0.5) * h / oh - 0.5, 0.0), h - 1.0)
            sx = min(max((j + 0.5) * w / ow - 0.5, 0.0), w - 1.0)
            y0, x0 = int(sy), int(sx)
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = sy - y0, sx - x0
            out[i, j] = (img[y0, x0] * (1 - fy) * (1 - fx) + img[y0, x1] * (1 - fy) * fx
                         + img[y1, x0] * fy * (1 - fx) + img[y1, x1] * fy * fx)
    return out


def test_resize_same_size_is_identity():
    img = np.random.default_rng(0).integers(0, 256, (9, 7)).astype(np.uint8)
    npt.assert_allclose(resize_bilinear(img, 9, 7), img, atol=1e-5)


def test_resize_constant_stays_constant():
    img = np.full((5, 5), 77, dtype=np.uint8)
    npt.assert_allclose(resize_bilinear(img, 128, 128), 77.0, atol=1e-4)


def test_resize_two_pixel_gradient():
    img = np.array([[0.0], [255.0]])
    out = resize_bilinear(img, 3, 1)
    npt.assert_allclose(out[:, 0], [0.0, 127.5, 255.0], atol=1e-4)
    npt.assert_allclose(out, bilinear_oracle(img, 3, 1), atol=1e-4)


def test_resize_matches_oracle_random():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 255, (11, 6))
    for oh, ow in ((5, 9), (22, 3), (128, 128)):
        npt.assert_allclose(resize_bilinear(img, oh, ow),
                            bilinear_oracle(img, oh, ow), atol=1e-3)


def test_normalize_values():
    img = np.array([[0, 128, 255]], dtype=np.uint8)
    out = normalize(img)
    assert out.dtype == np.float32
    npt.assert_allclose(out, [[0.0, 128 / 255, 1.0]], atol=1e-7)
    assert abs(out[0, 1] - 0.50196) < 1e-5


def test_css_to_cm_examples():
    dev = DeviceProfile(1000, 2000, ppi=254.0, dpr=1.0)
    assert css_to_cm(0.0, 0.0, dev) == (0.0, 0.0)
    x, y = css_to_cm(100.0, 0.0, dev)
    assert x == pytest.approx(1.0)
    assert y == 0.0
    dev2 = DeviceProfile(1000, 2000, ppi=508.0, dpr=2.0)
    x, y = css_to_cm(100.0, 100.0, dev2)
    assert (x, y) == (pytest.approx(1.0), pytest.approx(1.0))


def test_css_to_cm_linear_and_origin_preserving():
    dev = DEVICE_PRESETS["standard"]
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 500, 100)
    b = rng.uniform(0, 500, 100)
    xa, ya = css_to_cm(a, a, dev)
    xb, yb = css_to_cm(b, b, dev)
    xab, yab = css_to_cm(a + b, a + b, dev)
    npt.assert_allclose(xab, xa + xb, rtol=1e-12)
    npt.assert_allclose(yab, ya + yb, rtol=1e-12)


def test_detect_face_on_synthetic_frame():
    dev = DEVICE_PRESETS["standard"]
    params = RenderParams.for_device(dev)
    frame = render_gaze_frame((2.0, 5.0), params)
    box = detect_face(frame)
    assert abs(box.x - params.face.x) <= 2
    assert abs(box.y - params.face.y) <= 2
    assert abs(box.w - params.face.w) <= 2
    assert abs(box.h - params.face.h) <= 2


def test_detect_face_all_black():
    with pytest.raises(NoFaceFound):
        detect_face(np.zeros((32, 32), dtype=np.uint8))


def test_detect_face_full_frame():
    box = detect_face(np.full((16, 20), 200, dtype=np.uint8))
    assert (box.x, box.y, box.w, box.h) == (0, 0, 20, 16)


def test_crop_margin_clamps_to_frame():
    frame = np.arange(100, dtype=np.uint8).reshape(10, 10)
    crop = crop_with_margin(frame, FaceBox(0, 0, 10, 10), margin=0.1)
    assert crop.shape == (10, 10)
    crop = crop_with_margin(frame, FaceBox(2, 2, 6, 6), margin=0.1)
    assert crop.shape == (8, 8)  # 1px margin each side


def test_preprocess_composition_and_determinism():
    dev = DEVICE_PRESETS["compact"]
    params = RenderParams.for_device(dev)
    frame = render_gaze_frame((1.5, 3.0), params)
    box = detect_face(frame)
    t1 = preprocess(frame, box)
    assert t1.shape == (128, 128, 1)
    assert t1.dtype == np.float32
    assert t1.min() >= 0.0 and t1.max() <= 1.0
    # composition equals step-by-step application
    crop = crop_with_margin(frame, box)
    manual = normalize(resize_bilinear(to_greyscale(crop), 128, 128))[:, :, None]
    npt.assert_array_equal(t1, manual)
    npt.assert_array_equal(t1, preprocess(frame, box))


# -- recordings & label mapping ------------------------------------------------


def make_recording(tmp_path, pts, coords, device=None):
    from edgegaze.pgm import write_pgm

    device = device or DEVICE_PRESETS["compact"]
    rec = tmp_path / "rec"
    (rec / "frames").mkdir(parents=True)
    frames = []
    for i, t in enumerate(pts):
        rel = f"frames/f_{i:05d}.pgm"
        write_pgm(rec / rel, np.full((8, 8), 100, dtype=np.uint8))
        frames.append({"file": rel, "pts_ms": t})
    manifest = {
        "schema_version": 1,
        "name": "rec",
        "position_tag": "level",
        "device": device.to_dict(),
        "frames": frames,
        "coords": coords,
    }
    path = rec / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


def test_load_recording_valid(tmp_path):
    path = make_recording(tmp_path, [0.0, 33.0, 66.0], [[0, 0, 0], [50, 10, 10]])
    rec = load_recording(path)
    assert len(rec.frames) == 3
    assert rec.coords.shape == (2, 3)


def test_load_recording_rejects_shuffled_pts(tmp_path):
    path = make_recording(tmp_path, [0.0, 66.0, 33.0], [[0, 0, 0], [50, 10, 10]])
    with pytest.raises(ManifestError, match="strictly increasing"):
        load_recording(path)


def test_load_recording_rejects_empty_coords(tmp_path):
    path = make_recording(tmp_path, [0.0, 33.0], [])
    with pytest.raises(ManifestError, match="no dot coordinates"):
        load_recording(path)


def test_load_recording_missing_frame_file(tmp_path):
    path = make_recording(tmp_path, [0.0, 33.0], [[0, 0, 0], [50, 10, 10]])
    (tmp_path / "rec" / "frames" / "f_00001.pgm").unlink()
    with pytest.raises(ManifestError, match="missing frame"):
        load_recording(path)


def test_map_coords_exact_at_timestamps(tmp_path):
    dev = DeviceProfile(1000, 1000, ppi=254.0, dpr=1.0)  # 100 css px = 1 cm
    path = make_recording(tmp_path, [0.0, 50.0], [[0, 0, 0], [50, 100, 200]], device=dev)
    labels = map_coords_to_frames(load_recording(path))
    npt.assert_allclose(labels[0], [0.0, 0.0])
    npt.assert_allclose(labels[1], [1.0, 2.0])


def test_map_coords_midpoint_and_clamp(tmp_path):
    dev = DeviceProfile(1000, 1000, ppi=254.0, dpr=1.0)
    path = make_recording(tmp_path, [25.0, 80.0], [[0, 0, 0], [50, 10, 10]], device=dev)
    labels = map_coords_to_frames(load_recording(path))
    npt.assert_allclose(labels[0], [0.05, 0.05])  # midpoint of (0,0)-(10,10) css
    npt.assert_allclose(labels[1], [0.1, 0.1])    # clamped past the last coord


def test_synthetic_recording_has_full_coverage(tmp_path):
    manifests = gen_dataset(tmp_path / "ds", 1, seed=5, fps=5.0, duration_s=20.0)
    rec = load_recording(manifests[0])
    assert rec.coords.shape[0] == 400  # 20 s at 20 Hz
    labels = map_coords_to_frames(rec)
    assert labels.shape == (len(rec.frames), 2)
    assert not np.isnan(labels).any()  # zero unlabeled frames


# -- PGM -------------------------------------------------------------------------


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (13, 17)).astype(np.uint8)
    write_pgm(tmp_path / "x.pgm", img)
    npt.assert_array_equal(read_pgm(tmp_path / "x.pgm"), img)


def test_pgm_rejects_garbage(tmp_path):
    (tmp_path / "bad.pgm").write_bytes(b"P6\n1 1\n255\n\x00")
    with pytest.raises(PGMError):
        read_pgm(tmp_path / "bad.pgm")
    (tmp_path / "short.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(PGMError):
        read_pgm(tmp_path / "short.pgm")
