"""File-format tests: header parsing, both coding modes, rate accounting,
and the typed failure paths for damaged or mismatched bitstreams."""

import os
import struct

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

import waveletcodec as wc
from waveletcodec.cdftable import build_factorized_cdf
from waveletcodec.container import _HEADER, MAGIC
from waveletcodec.gaussian import dequantize, quantize
from waveletcodec.graph import TILE, normalize_image
from waveletcodec.manifest import save_manifest


def smooth_image(seed, h, w):
    rng = np.random.default_rng(seed)
    base = gaussian_filter(rng.normal(size=(h, w, 3)), sigma=(4, 4, 0))
    base /= np.abs(base).max()
    return np.clip(128 + 110 * base, 0, 255).astype(np.uint8)


def psnr(a, b):
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    return 10 * np.log10(255.0 ** 2 / mse)


@pytest.fixture(scope="module")
def img():
    return smooth_image(5, 150, 130)


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    path = tmp_path_factory.mktemp("m") / "model.wcvm"
    wc.make_random_manifest(path, seed=3, n=6, m=10, slices=5, wavelet=1)
    return wc.CodecGraph(wc.load_manifest(path))


@pytest.fixture(scope="module")
def neural_stream(img, model):
    return wc.encode_array(img, model)


class TestNeuralMode:
    def test_decode_matches_reference_pipeline(self, img, model,
                                               neural_stream):
        data, _ = neural_stream
        h, w = img.shape[:2]
        padded = np.pad(img, ((0, -h % TILE), (0, -w % TILE), (0, 0)),
                        mode="edge").transpose(2, 0, 1)
        lat = model.analysis(normalize_image(padded))
        z = model.hyper_analysis(lat)
        side = model.hyper_synthesis(dequantize(quantize(z, 0.0), 0.0))
        _, dec_lf = wc.encode_lf(lat.y_l, side, model)
        _, dec_hf = wc.encode_hf(lat.y_h, dec_lf, side, model)
        ref = model.synthesis(wc.LatentPair(y_l=dec_lf, y_h=dec_hf),
                              out_hw=(h, w))
        ref = np.clip(np.round(ref), 0, 255).astype(np.uint8)
        rec = wc.decode_array(data, model)
        assert rec.shape == img.shape and rec.dtype == np.uint8
        np.testing.assert_array_equal(rec, ref.transpose(1, 2, 0))

    def test_encode_is_deterministic(self, img, model, neural_stream):
        data, _ = neural_stream
        again, _ = wc.encode_array(img, model)
        assert again == data

    def test_rate_report(self, img, model, neural_stream):
        data, rep = neural_stream
        h, w = img.shape[:2]
        assert rep.pixels == h * w
        assert rep.actual_bits == 8 * len(data)
        assert rep.bpp == 8 * len(data) / (h * w)
        # estimate covers tables, headers and flush; the residual is coder
        # slack, bounded by a few bytes per stream in either direction
        assert rep.audit_error() < 0.01

    def test_needs_model(self, img, neural_stream):
        with pytest.raises(wc.PreconditionViolation):
            wc.encode_array(img)
        data, _ = neural_stream
        with pytest.raises(wc.PreconditionViolation):
            wc.decode_array(data)

    def test_wrong_model_rejected(self, tmp_path, neural_stream):
        other = tmp_path / "other.wcvm"
        wc.make_random_manifest(other, seed=4, n=6, m=10, slices=5,
                                wavelet=1)
        data, _ = neural_stream
        with pytest.raises(wc.ModelMismatch):
            wc.decode_array(data, wc.CodecGraph(wc.load_manifest(other)))

    def test_header_model_disagreement(self, model, neural_stream):
        data, _ = neural_stream
        buf = bytearray(data)
        buf[7] = 9  # slices field no longer matches the manifest
        with pytest.raises(wc.DecodingError, match="disagrees"):
            wc.decode_array(bytes(buf), model)

    def test_truncation_always_typed(self, model, neural_stream):
        data, _ = neural_stream
        cuts = [0, 3, 10, 20, 33, 40, len(data) // 2, len(data) - 1]
        for cut in cuts:
            with pytest.raises((wc.DecodingError, wc.BadMagic)):
                wc.decode_array(data[:cut], model)

    def test_trailing_bytes_rejected(self, model, neural_stream):
        data, _ = neural_stream
        with pytest.raises(wc.DecodingError, match="trailing"):
            wc.decode_array(data + b"\x00", model)

    def test_bad_magic_and_version(self, model, neural_stream):
        data, _ = neural_stream
        with pytest.raises(wc.BadMagic):
            wc.decode_array(b"XXXX" + data[4:], model)
        buf = bytearray(data)
        buf[4] = 99
        with pytest.raises(wc.VersionUnsupported):
            wc.decode_array(bytes(buf), model)

    def test_zero_dims_rejected(self, model, neural_stream):
        data, _ = neural_stream
        buf = bytearray(data)
        struct.pack_into("<I", buf, 8, 0)  # orig_w
        with pytest.raises(wc.DecodingError):
            wc.decode_array(bytes(buf), model)

    def test_unknown_mode_and_table_flag(self, model, neural_stream):
        data, _ = neural_stream
        buf = bytearray(data)
        buf[5] = 7
        with pytest.raises(wc.DecodingError, match="mode"):
            wc.decode_array(bytes(buf), model)
        buf = bytearray(data)
        buf[_HEADER.size + 16 + 4] = 5  # z-segment flag byte
        with pytest.raises(wc.DecodingError, match="flag"):
            wc.decode_array(bytes(buf), model)

    def test_in_stream_table_flag_is_zero(self, neural_stream):
        data, _ = neural_stream
        assert data[:4] == MAGIC
        assert data[_HEADER.size + 16 + 4] == 0


class TestManifestBorneHyperTable:
    def test_flag_one_round_trip(self, img, model, tmp_path):
        h, w = img.shape[:2]
        padded = np.pad(img, ((0, -h % TILE), (0, -w % TILE), (0, 0)),
                        mode="edge").transpose(2, 0, 1)
        zq = quantize(model.hyper_analysis(
            model.analysis(normalize_image(padded))), 0.0)
        table = build_factorized_cdf(zq.reshape(zq.shape[0], -1))
        man = model.manifest
        tensors = {name: man.tensor(name) for name in man.index}
        path = tmp_path / "with_zcdf.wcvm"
        save_manifest(path, tensors, man.hyperparams, slopes=man.slopes,
                      zcdf=table.to_json())
        model2 = wc.CodecGraph(wc.load_manifest(path))

        data, rep = wc.encode_array(img, model2)
        assert data[_HEADER.size + 16 + 4] == 1
        rec = wc.decode_array(data, model2)
        assert rec.shape == img.shape
        # the per-image table costs bytes in-stream; the manifest-borne
        # one must not
        base, _ = wc.encode_array(img, model)
        assert len(data) < len(base)
        assert rep.audit_error() < 0.01


class TestNoSplitModel:
    def test_round_trip_without_hf_segment(self, img, tmp_path):
        path = tmp_path / "nosplit.wcvm"
        wc.make_random_manifest(path, seed=6, n=6, m=10, slices=5,
                                wavelet=1, split=False)
        model = wc.CodecGraph(wc.load_manifest(path))
        data, _ = wc.encode_array(img, model)
        rec = wc.decode_array(data, model)
        assert rec.shape == img.shape
        # HF slot is present but empty
        (hf_len,) = struct.unpack_from("<I", data, len(data) - 4)
        assert hf_len == 0

    def test_hf_payload_rejected(self, img, tmp_path):
        path = tmp_path / "nosplit2.wcvm"
        wc.make_random_manifest(path, seed=6, n=6, m=10, slices=5,
                                wavelet=1, split=False)
        model = wc.CodecGraph(wc.load_manifest(path))
        data, _ = wc.encode_array(img, model)
        buf = bytearray(data)
        struct.pack_into("<I", buf, len(buf) - 4, 1)
        with pytest.raises(wc.DecodingError):
            wc.decode_array(bytes(buf) + b"\x00", model)


class TestClassicalMode:
    def test_round_trip_matches_direct_codec(self, img):
        data, _ = wc.encode_array(img, mode="classical", qstep=2.0)
        rec = wc.decode_array(data)
        blob = wc.classical_encode(img, qstep=2.0)
        ref = np.clip(np.round(wc.classical_decode(blob)), 0,
                      255).astype(np.uint8)
        np.testing.assert_array_equal(rec, ref)
        assert psnr(rec, img) >= 42.0

    def test_wavelet_and_levels_options(self, img):
        for kind in (wc.WaveletKind.HAAR, wc.WaveletKind.CDF53,
                     wc.WaveletKind.CDF97):
            data, _ = wc.encode_array(img, mode="classical", qstep=4.0,
                                      levels=2, wavelet=kind)
            assert data[6] == int(kind)
            rec = wc.decode_array(data)
            assert psnr(rec, img) >= 38.0

    def test_finer_step_costs_more(self, img):
        fine, _ = wc.encode_array(img, mode="classical", qstep=1.0)
        coarse, _ = wc.encode_array(img, mode="classical", qstep=8.0)
        assert len(fine) > len(coarse)

    def test_rate_audit_tight(self, img):
        data, rep = wc.encode_array(img, mode="classical", qstep=2.0)
        assert rep.actual_bits == 8 * len(data)
        assert rep.audit_error() < 0.005

    def test_deterministic(self, img):
        a, _ = wc.encode_array(img, mode="classical", qstep=2.0)
        b, _ = wc.encode_array(img, mode="classical", qstep=2.0)
        assert a == b

    def test_truncation_always_typed(self, img):
        data, _ = wc.encode_array(img, mode="classical", qstep=4.0)
        for cut in (0, 5, 17, 20, 22, 40, len(data) // 2, len(data) - 1):
            with pytest.raises((wc.DecodingError, wc.BadMagic)):
                wc.decode_array(data[:cut])

    def test_trailing_bytes_rejected(self, img):
        data, _ = wc.encode_array(img, mode="classical", qstep=4.0)
        with pytest.raises(wc.DecodingError, match="trailing"):
            wc.decode_array(data + b"!")

    def test_level_field_must_match_stats(self, img):
        data, _ = wc.encode_array(img, mode="classical", qstep=4.0)
        buf = bytearray(data)
        buf[_HEADER.size + 4] += 1  # levels byte behind the f32 qstep
        with pytest.raises(wc.DecodingError):
            wc.decode_array(bytes(buf))

    def test_unknown_mode_value_rejected(self, img):
        with pytest.raises(wc.PreconditionViolation):
            wc.encode_array(img, mode="fancy")


class TestInputValidation:
    def test_wrong_array_shape(self):
        with pytest.raises(wc.ShapeMismatch):
            wc.encode_array(np.zeros((10, 10), dtype=np.uint8),
                            mode="classical")
        with pytest.raises(wc.ShapeMismatch):
            wc.encode_array(np.zeros((10, 10, 3), dtype=np.float32),
                            mode="classical")


class TestFileRoundTrip:
    def test_png_round_trip(self, img, tmp_path):
        src = tmp_path / "in.png"
        wc.save_image(img, src)
        bit = tmp_path / "out.wcvn"
        rep = wc.encode_file(src, bit, mode="classical", qstep=2.0)
        assert rep.actual_bits == 8 * os.path.getsize(bit)
        out = tmp_path / "rec.png"
        wc.decode_file(bit, out)
        rec = wc.load_image(out)
        ref = wc.decode_array(bit.read_bytes())
        np.testing.assert_array_equal(rec, ref)

    def test_ppm_output(self, img, tmp_path):
        src = tmp_path / "in.png"
        wc.save_image(img, src)
        bit = tmp_path / "out.wcvn"
        wc.encode_file(src, bit, mode="classical", qstep=4.0)
        out = tmp_path / "rec.ppm"
        wc.decode_file(bit, out)
        assert wc.load_image(out).shape == img.shape

    def test_missing_input_file(self, tmp_path):
        with pytest.raises(wc.IoError):
            wc.encode_file(tmp_path / "nope.png", tmp_path / "x.wcvn",
                           mode="classical")
        with pytest.raises(wc.IoError):
            wc.decode_file(tmp_path / "nope.wcvn", tmp_path / "x.png")

    def test_non_rgb_input_rejected(self, tmp_path):
        from PIL import Image
        gray = tmp_path / "gray.png"
        Image.fromarray(np.zeros((32, 32), dtype=np.uint8), "L").save(gray)
        with pytest.raises(wc.IoError, match="RGB"):
            wc.load_image(gray)

    def test_junk_file_rejected(self, tmp_path):
        junk = tmp_path / "junk.png"
        junk.write_bytes(b"this is not an image")
        with pytest.raises(wc.IoError):
            wc.load_image(junk)
