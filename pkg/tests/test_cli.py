import numpy as np
import pytest

from pcac import load_ply, psnr_y, rgb_to_yuv, save_ply
from pcac.cli import EXIT_FORMAT, EXIT_IO, EXIT_MISMATCH, EXIT_OK, main

from conftest import make_random_cloud, make_textured_cloud


@pytest.fixture
def sample_ply(tmp_path, rng):
    cloud = make_random_cloud(rng, 600)
    path = tmp_path / "in.ply"
    save_ply(cloud, path)
    return cloud, path


def test_encode_decode_pipeline(tmp_path, sample_ply, capsys):
    cloud, ply = sample_ply
    stream = tmp_path / "out.pcac"
    rec = tmp_path / "rec.ply"
    assert main(["encode", "-i", str(ply), "-o", str(stream), "--q", "32"]) == EXIT_OK
    assert main(["decode", "-i", str(stream), "--geometry", str(ply),
                 "-o", str(rec)]) == EXIT_OK
    decoded = load_ply(rec)
    assert decoded.count == cloud.count
    assert psnr_y(rgb_to_yuv(cloud.rgb), rgb_to_yuv(decoded.rgb)) > 15.0


def test_decode_with_wrong_geometry(tmp_path, sample_ply, rng, capsys):
    _, ply = sample_ply
    stream = tmp_path / "out.pcac"
    main(["encode", "-i", str(ply), "-o", str(stream)])
    wrong = make_random_cloud(rng, 99)
    wrong_ply = tmp_path / "wrong.ply"
    save_ply(wrong, wrong_ply)
    code = main(["decode", "-i", str(stream), "--geometry", str(wrong_ply),
                 "-o", str(tmp_path / "rec.ply")])
    assert code == EXIT_MISMATCH
    assert "mismatch" in capsys.readouterr().err


def test_missing_input_is_io_error(tmp_path, capsys):
    code = main(["encode", "-i", str(tmp_path / "nope.ply"),
                 "-o", str(tmp_path / "out.pcac")])
    assert code == EXIT_IO


def test_garbage_input_is_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.ply"
    bad.write_text("definitely not a ply\n")
    code = main(["encode", "-i", str(bad), "-o", str(tmp_path / "out.pcac")])
    assert code == EXIT_FORMAT


def test_corrupt_bitstream_is_format_error(tmp_path, sample_ply, capsys):
    _, ply = sample_ply
    stream = tmp_path / "out.pcac"
    main(["encode", "-i", str(ply), "-o", str(stream)])
    data = bytearray(stream.read_bytes())
    data[-3] ^= 0x40
    stream.write_bytes(bytes(data))
    code = main(["decode", "-i", str(stream), "--geometry", str(ply),
                 "-o", str(tmp_path / "rec.ply")])
    assert code == EXIT_FORMAT


def test_unknown_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--definitely-not-a-flag"])
    assert exc.value.code == 2


def test_sweep_csv_schema(tmp_path, sample_ply, capsys):
    _, ply = sample_ply
    csv_path = tmp_path / "sweep.csv"
    assert main(["sweep", "-i", str(ply), "--q", "16,64",
                 "--csv", str(csv_path)]) == EXIT_OK
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "Q,bpp,psnr_y,psnr_u,psnr_v,encode_ms,decode_ms"
    assert len(lines) == 3


def test_ablate_reports_all_models(tmp_path, capsys):
    cloud = make_textured_cloud(n=1200)
    ply = tmp_path / "t.ply"
    save_ply(cloud, ply)
    csv_path = tmp_path / "abl.csv"
    assert main(["ablate", "-i", str(ply), "--q", "8,16,32,64",
                 "--csv", str(csv_path)]) == EXIT_OK
    out = capsys.readouterr().out
    for model in ("V1", "V2", "V3", "V4", "V5"):
        assert f"{model}: BD-rate vs V1" in out
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "model,Q,bpp,psnr_y,psnr_u,psnr_v,encode_ms,decode_ms"
    assert len(lines) == 1 + 5 * 4


def test_fit_lambda_from_sweeps(tmp_path, sample_ply, capsys):
    _, ply = sample_ply
    csvs = []
    for i, qs in enumerate(("4,8,16,32", "8,16,32,64")):
        path = tmp_path / f"s{i}.csv"
        assert main(["sweep", "-i", str(ply), "--q", qs, "--csv", str(path)]) == EXIT_OK
        csvs.append(str(path))
    model_path = tmp_path / "model.txt"
    assert main(["fit-lambda", "--csv", ",".join(csvs),
                 "-o", str(model_path)]) == EXIT_OK
    text = model_path.read_text()
    values = dict(line.split("=") for line in text.strip().splitlines())
    assert set(values) == {"a", "b", "r_square"}
    assert float(values["a"]) > 0
    assert float(values["b"]) > 0


def test_info_prints_header(tmp_path, sample_ply, capsys):
    _, ply = sample_ply
    stream = tmp_path / "out.pcac"
    main(["encode", "-i", str(ply), "-o", str(stream)])
    capsys.readouterr()
    assert main(["info", "-i", str(stream)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "points: 600" in out
    assert "slices:" in out
    assert "bpp" in out


def test_threads_flag_accepted(tmp_path, sample_ply):
    _, ply = sample_ply
    csv_path = tmp_path / "sweep.csv"
    assert main(["--threads", "2", "sweep", "-i", str(ply), "--q", "16,64",
                 "--csv", str(csv_path)]) == EXIT_OK


def test_env_threads(tmp_path, sample_ply, monkeypatch):
    _, ply = sample_ply
    monkeypatch.setenv("PCAC_THREADS", "2")
    csv_path = tmp_path / "sweep.csv"
    assert main(["sweep", "-i", str(ply), "--q", "16,64",
                 "--csv", str(csv_path)]) == EXIT_OK
