"""Command-line interface tests, driven through main(argv)."""

import shutil
import subprocess
import sys

import pytest

import waveletcodec as wc
from waveletcodec.cli import main
from waveletcodec.synthimg import write_corpus


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parsed(stdout):
    pairs = {}
    for line in stdout.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
    return pairs


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli-corpus")
    write_corpus(d, count=2, seed=40, h=160, w=160)
    return d


@pytest.fixture(scope="module")
def image(corpus):
    return str(corpus / "synth00.png")


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli-m") / "model.wcvm"
    wc.make_random_manifest(path, seed=8, n=4, m=10, slices=5, wavelet=1)
    return str(path)


class TestEncodeDecode:
    def test_classical_cycle(self, capsys, image, tmp_path):
        bit = str(tmp_path / "img.wcvn")
        out = str(tmp_path / "rec.png")
        code, stdout, _ = run(capsys, "encode", image, bit,
                              "--qstep", "2", "--wavelet", "53")
        assert code == 0
        stats = parsed(stdout)
        assert float(stats["bpp"]) > 0
        assert int(stats["actual_bits"]) % 8 == 0
        code, stdout, _ = run(capsys, "decode", bit, out)
        assert code == 0
        code, stdout, _ = run(capsys, "metrics", image, out)
        assert code == 0
        stats = parsed(stdout)
        assert float(stats["psnr_db"]) > 45.0
        assert 0.9 < float(stats["msssim"]) <= 1.0

    def test_neural_cycle(self, capsys, image, model_path, tmp_path):
        bit = str(tmp_path / "img.wcvn")
        out = str(tmp_path / "rec.png")
        code, stdout, _ = run(capsys, "encode", image, bit,
                              "--model", model_path)
        assert code == 0
        assert open(bit, "rb").read(6)[5] == 0  # mode byte: neural
        code, _, _ = run(capsys, "decode", bit, out, "--model", model_path)
        assert code == 0
        code, stdout, _ = run(capsys, "metrics", image, out)
        assert code == 0

    def test_mode_defaults_to_classical(self, capsys, image, tmp_path):
        bit = str(tmp_path / "img.wcvn")
        code, _, _ = run(capsys, "encode", image, bit)
        assert code == 0
        assert open(bit, "rb").read(6)[5] == 1  # mode byte: classical

    def test_neural_without_model_fails(self, capsys, image, tmp_path):
        code, _, err = run(capsys, "encode", image,
                           str(tmp_path / "x.wcvn"), "--mode", "neural")
        assert code == 1
        assert "PreconditionViolation" in err

    def test_decode_with_wrong_model(self, capsys, image, model_path,
                                     tmp_path):
        bit = str(tmp_path / "img.wcvn")
        assert run(capsys, "encode", image, bit,
                   "--model", model_path)[0] == 0
        other = tmp_path / "other.wcvm"
        wc.make_random_manifest(other, seed=9, n=4, m=10, slices=5,
                                wavelet=1)
        code, _, err = run(capsys, "decode", bit,
                           str(tmp_path / "rec.png"),
                           "--model", str(other))
        assert code == 1
        assert "ModelMismatch" in err

    def test_unreadable_input(self, capsys, tmp_path):
        code, _, err = run(capsys, "encode", str(tmp_path / "nope.png"),
                           str(tmp_path / "x.wcvn"))
        assert code == 1
        assert "IoError" in err


class TestAblationFlags:
    def test_slices_assertion(self, capsys, image, model_path, tmp_path):
        code, _, err = run(capsys, "encode", image,
                           str(tmp_path / "x.wcvn"),
                           "--model", model_path, "--slices", "10")
        assert code == 1
        assert "ModelMismatch" in err

    def test_matching_flags_pass(self, capsys, image, model_path,
                                 tmp_path):
        code, _, _ = run(capsys, "encode", image,
                         str(tmp_path / "x.wcvn"),
                         "--model", model_path, "--slices", "5",
                         "--wavelet", "53")
        assert code == 0

    def test_wavelet_assertion(self, capsys, image, model_path, tmp_path):
        code, _, err = run(capsys, "encode", image,
                           str(tmp_path / "x.wcvn"),
                           "--model", model_path, "--wavelet", "97")
        assert code == 1
        assert "ModelMismatch" in err

    def test_no_weconv_assertion(self, capsys, image, model_path,
                                 tmp_path):
        code, _, err = run(capsys, "encode", image,
                           str(tmp_path / "x.wcvn"),
                           "--model", model_path, "--no-weconv")
        assert code == 1
        assert "ModelMismatch" in err
        plain = tmp_path / "plain.wcvm"
        wc.make_random_manifest(plain, seed=10, n=4, m=10, slices=5,
                                wavelet=1, weconv=False)
        code, _, _ = run(capsys, "encode", image,
                         str(tmp_path / "y.wcvn"),
                         "--model", str(plain), "--no-weconv")
        assert code == 0


class TestSweepAndBdrate:
    def test_sweep_then_bdrate(self, capsys, corpus, tmp_path):
        table = str(tmp_path / "table.csv")
        code, stdout, _ = run(capsys, "sweep", str(corpus),
                              "--out", table, "--name", "wt53",
                              "--qsteps", "2,4,8,16")
        assert code == 0
        assert "max_audit=" in stdout
        code, _, _ = run(capsys, "sweep", str(corpus),
                         "--out", table, "--name", "haar",
                         "--wavelet", "haar", "--qsteps", "2,4,8,16",
                         "--append")
        assert code == 0
        code, stdout, _ = run(capsys, "bdrate", table, "wt53", "wt53")
        assert code == 0
        assert abs(float(parsed(stdout)["bd_rate_percent"])) < 1e-9
        code, stdout, _ = run(capsys, "bdrate", table, "wt53", "haar")
        assert code == 0
        float(parsed(stdout)["bd_rate_percent"])

    def test_sweep_empty_dir(self, capsys, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        code, _, err = run(capsys, "sweep", str(empty),
                           "--out", str(tmp_path / "t.csv"))
        assert code == 1
        assert "IoError" in err

    def test_bdrate_missing_config(self, capsys, corpus, tmp_path):
        table = str(tmp_path / "table.csv")
        run(capsys, "sweep", str(corpus), "--out", table,
            "--name", "wt53", "--qsteps", "2,4,8,16")
        code, _, err = run(capsys, "bdrate", table, "wt53", "ghost")
        assert code == 1
        assert "DegenerateInput" in err


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "waveletcodec.cli", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "encode" in proc.stdout and "bdrate" in proc.stdout

    def test_console_script(self):
        exe = shutil.which("wavcodec")
        assert exe, "wavcodec console script not installed"
        proc = subprocess.run([exe, "--help"], capture_output=True,
                              text=True)
        assert proc.returncode == 0
        assert "sweep" in proc.stdout
