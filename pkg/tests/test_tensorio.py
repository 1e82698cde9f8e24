import json
import os

import numpy as np
import pytest
from PIL import Image

import latentvsr as lv
from latentvsr import errors


def make_video(rng, t=3, h=8, w=8):
    return lv.Video(frames=rng.random((t, 3, h, w)))


# --- frame sequences --------------------------------------------------------


def test_white_frames_read_as_ones(tmp_path):
    names = []
    for i in range(3):
        name = f"w{i}.png"
        Image.fromarray(np.full((8, 8, 3), 255, dtype=np.uint8)).save(tmp_path / name)
        names.append(name)
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"frames": names}))
    video = lv.read_frame_sequence(str(manifest))
    assert video.num_frames == 3
    assert np.all(video.frames == 1.0)


def test_write_read_round_trip_bitwise(tmp_path, rng):
    video = make_video(rng)
    manifest = lv.write_frame_sequence(video, str(tmp_path / "seq"))
    first = lv.read_frame_sequence(manifest)
    manifest2 = lv.write_frame_sequence(first, str(tmp_path / "seq2"))
    second = lv.read_frame_sequence(manifest2)
    assert np.array_equal(first.frames, second.frames)


def test_dimension_mismatch_names_offender(tmp_path):
    Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(tmp_path / "a.png")
    Image.fromarray(np.zeros((16, 16, 3), dtype=np.uint8)).save(tmp_path / "b.png")
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"frames": ["a.png", "b.png"]}))
    with pytest.raises(errors.DimensionMismatch) as exc:
        lv.read_frame_sequence(str(manifest))
    assert "b.png" in str(exc.value)


def test_empty_manifest_rejected(tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"frames": []}))
    with pytest.raises(errors.EmptySequence):
        lv.read_frame_sequence(str(manifest))


def test_missing_frame_rejected(tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps({"frames": ["nope.png"]}))
    with pytest.raises(errors.MissingFile):
        lv.read_frame_sequence(str(manifest))


def test_quantizer_rounds_half_up_and_clamps(tmp_path):
    frames = np.zeros((1, 3, 1, 3))
    frames[0, :, 0, 0] = 0.5      # 127.5 -> 128
    frames[0, :, 0, 1] = 1.0      # in-range max
    frames[0, :, 0, 2] = 0.0
    video = lv.Video(frames=frames)
    manifest = lv.write_frame_sequence(video, str(tmp_path / "q"))
    stored = np.asarray(
        Image.open(os.path.join(os.path.dirname(manifest), "frame_00000.png"))
    )
    assert stored[0, 0, 0] == 128
    assert stored[0, 1, 0] == 255
    assert stored[0, 2, 0] == 0
    # clamping happens before quantization
    assert np.array_equal(lv.tensorio.quantize_to_u8(np.array([1.2])), [255])
    assert np.array_equal(lv.tensorio.quantize_to_u8(np.array([-0.3])), [0])


def test_zero_video_writes_black_frames(tmp_path):
    video = lv.Video(frames=np.zeros((2, 3, 4, 4)))
    manifest = lv.write_frame_sequence(video, str(tmp_path / "z"))
    again = lv.read_frame_sequence(manifest)
    assert np.all(again.frames == 0.0)


def test_frame_rate_round_trips(tmp_path, rng):
    video = lv.Video(frames=rng.random((2, 3, 4, 4)), frame_rate=24.0)
    manifest = lv.write_frame_sequence(video, str(tmp_path / "fr"))
    assert lv.read_frame_sequence(manifest).frame_rate == 24.0


def test_bare_list_manifest_accepted(tmp_path):
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(tmp_path / "a.png")
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps(["a.png"]))
    assert lv.read_frame_sequence(str(manifest)).num_frames == 1


# --- flow files ---------------------------------------------------------------


def test_flow_file_layout_by_hand(tmp_path):
    # magic, W=2, H=1, vectors (1,0) and (0,-1)
    blob = (
        np.asarray([202021.25], dtype="<f4").tobytes()
        + np.asarray([2, 1], dtype="<i4").tobytes()
        + np.asarray([1.0, 0.0, 0.0, -1.0], dtype="<f4").tobytes()
    )
    path = tmp_path / "hand.flo"
    path.write_bytes(blob)
    flow = lv.read_flow(str(path))
    assert flow.spatial_shape == (1, 2)
    assert np.array_equal(flow.vectors[:, 0, 0], [1.0, 0.0])
    assert np.array_equal(flow.vectors[:, 0, 1], [0.0, -1.0])


def test_flow_round_trip_bitwise(tmp_path, rng):
    field = lv.FlowField(
        vectors=rng.standard_normal((2, 5, 7)).astype(np.float32)
    )
    path = str(tmp_path / "rt.flo")
    lv.write_flow(field, path)
    again = lv.read_flow(path)
    assert np.array_equal(again.vectors, field.vectors)
    lv.write_flow(again, str(tmp_path / "rt2.flo"))
    assert (tmp_path / "rt.flo").read_bytes() == (tmp_path / "rt2.flo").read_bytes()


def test_flow_bad_magic(tmp_path):
    path = tmp_path / "bad.flo"
    path.write_bytes(b"\x00" * 16)
    with pytest.raises(errors.BadMagic):
        lv.read_flow(str(path))


def test_flow_truncated(tmp_path):
    blob = (
        np.asarray([202021.25], dtype="<f4").tobytes()
        + np.asarray([4, 4], dtype="<i4").tobytes()
        + b"\x00" * 8
    )
    path = tmp_path / "short.flo"
    path.write_bytes(blob)
    with pytest.raises(errors.TruncatedFile):
        lv.read_flow(str(path))


def test_flow_rejects_nan(tmp_path):
    blob = (
        np.asarray([202021.25], dtype="<f4").tobytes()
        + np.asarray([1, 1], dtype="<i4").tobytes()
        + np.asarray([np.nan, 0.0], dtype="<f4").tobytes()
    )
    path = tmp_path / "nan.flo"
    path.write_bytes(blob)
    with pytest.raises(errors.NonFiniteData):
        lv.read_flow(str(path))


# --- latent files ---------------------------------------------------------------


def test_latent_single_element_file_is_28_bytes(tmp_path):
    # 8-byte magic + 4x4-byte dims + one float32 sample
    latent = lv.LatentVideo(data=np.zeros((1, 1, 1, 1), dtype=np.float32))
    path = str(tmp_path / "one.lat")
    lv.write_latent(latent, path)
    blob = open(path, "rb").read()
    assert len(blob) == 8 + 16 + 4
    assert blob[:8] == b"UAVLAT01"
    assert blob[24:] == b"\x00\x00\x00\x00"


def test_latent_round_trip_bitwise(tmp_path, rng):
    data = rng.standard_normal((2, 4, 3, 5)).astype(np.float32)
    path = str(tmp_path / "rt.lat")
    lv.write_latent(lv.LatentVideo(data=data), path)
    again = lv.read_latent(path)
    assert again.data.dtype == np.float32
    assert np.array_equal(again.data, data)


def test_latent_truncated_payload(tmp_path):
    import struct

    blob = b"UAVLAT01" + struct.pack("<4I", 2, 4, 8, 8) + b"\x00" * 16
    path = tmp_path / "short.lat"
    path.write_bytes(blob)
    with pytest.raises(errors.TruncatedFile):
        lv.read_latent(str(path))


def test_latent_bad_magic(tmp_path):
    path = tmp_path / "bad.lat"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(errors.BadMagic):
        lv.read_latent(str(path))


def test_latent_rejects_inf(tmp_path):
    import struct

    blob = (
        b"UAVLAT01"
        + struct.pack("<4I", 1, 1, 1, 1)
        + np.asarray([np.inf], dtype="<f4").tobytes()
    )
    path = tmp_path / "inf.lat"
    path.write_bytes(blob)
    with pytest.raises(errors.NonFiniteData):
        lv.read_latent(str(path))


# --- type invariants -------------------------------------------------------------


def test_video_rejects_out_of_range():
    with pytest.raises(errors.InvalidParameter):
        lv.Video(frames=np.full((1, 3, 2, 2), 1.5))


def test_video_rejects_nan():
    frames = np.zeros((1, 3, 2, 2))
    frames[0, 0, 0, 0] = np.nan
    with pytest.raises(errors.NonFiniteData):
        lv.Video(frames=frames)


def test_flowfield_requires_adjacent_frames():
    with pytest.raises(errors.InvalidParameter):
        lv.FlowField(
            vectors=np.zeros((2, 2, 2), dtype=np.float32),
            from_index=0,
            to_index=2,
        )
