"""Dataset loading, validation codes, evaluation, baselines, reports."""

import io
import json
import shutil
import zipfile

import numpy as np
import pytest

from conftest import background_layer, build_scene, copy_submission, make_layer, textured_sprite
from fibench import imaging
from fibench.harness import (
    DatasetError,
    EvaluateOptions,
    MetricsReport,
    SubmissionError,
    evaluate_submission,
    load_dataset,
    make_baseline_submission,
    parse_report,
    render_report,
    validate_submission,
)
from fibench.harness.baselines import baseline_interpolate
from fibench.harness.dataset import SINGLE_FRAME_TIMESTEP
from fibench.imaging import RasterImage
from fibench.synth.scene import mini_config
from fibench.synth.sequence import generate_dataset, generate_sequence
from fibench.synth.transforms import GeometricTransform


class TestLoadDataset:
    def test_fresh_dataset_indexed(self, mini_dataset):
        idx = mini_dataset.index
        assert len(idx.sequences) == 2
        assert list(idx.tiers) == ["4k", "2k", "1k"]
        assert idx.has_ground_truth

    def test_incomplete_sequence_skipped_with_warning(self, mini_dataset, tmp_path):
        root = tmp_path / "broken"
        shutil.copytree(mini_dataset.root, root)
        victim = next((root / "seq_0001").rglob("flow_t3_to_t0.flo"))
        victim.unlink()
        idx = load_dataset(root)
        assert idx.sequences == ("seq_0000",)
        assert any("seq_0001" in w for w in idx.warnings)

    def test_empty_dir_fails(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path)

    def test_scan_without_index_file(self, mini_dataset, tmp_path):
        root = tmp_path / "noindex"
        shutil.copytree(mini_dataset.root, root)
        (root / "dataset.json").unlink()
        idx = load_dataset(root)
        assert len(idx.sequences) == 2
        assert idx.has_ground_truth


class TestValidateSubmission:
    def test_complete_payload(self, mini_dataset, mini_blend_submission):
        sub = validate_submission(mini_blend_submission, mini_dataset.index)
        assert sub.method == "baseline-blend"
        assert sub.ensembling is False
        assert len(sub.digest) == 64
        assert sub.timesteps == (1, 2, 3, 4, 5, 6, 7)

    def test_digest_stable(self, mini_dataset, mini_blend_submission):
        a = validate_submission(mini_blend_submission, mini_dataset.index).digest
        b = validate_submission(mini_blend_submission, mini_dataset.index).digest
        assert a == b

    def test_missing_frame(self, mini_dataset, mini_blend_submission, tmp_path):
        broken = copy_submission(mini_blend_submission, tmp_path / "sub")
        next(broken.glob("seq_0000/res_*/pred_t4.png")).unlink()
        with pytest.raises(SubmissionError) as exc:
            validate_submission(broken, mini_dataset.index)
        assert exc.value.code == "MISSING_FRAME"
        assert "seq_0000" in str(exc.value)

    def test_bad_dimensions(self, mini_dataset, mini_blend_submission, tmp_path):
        broken = copy_submission(mini_blend_submission, tmp_path / "sub")
        victim = next(broken.glob("seq_0001/res_128x64/pred_t2.png"))
        img = RasterImage(np.zeros((10, 10, 3), np.uint8), coded=True)
        victim.write_bytes(imaging.write_image(img))
        with pytest.raises(SubmissionError) as exc:
            validate_submission(broken, mini_dataset.index)
        assert exc.value.code == "BAD_DIMENSIONS"
        assert "seq_0001" in str(exc.value) and "t2" in str(exc.value)

    def test_bad_bitdepth(self, mini_dataset, mini_blend_submission, tmp_path):
        broken = copy_submission(mini_blend_submission, tmp_path / "sub")
        victim = next(broken.glob("seq_0000/res_128x64/pred_t3.png"))
        w, h = mini_dataset.index.tiers["4k"]
        mask = imaging.OcclusionMask(np.zeros((h, w), np.uint8), np.ones((h, w), bool))
        victim.write_bytes(imaging.write_mask_image(mask))  # 8-bit gray, not RGB
        with pytest.raises(SubmissionError) as exc:
            validate_submission(broken, mini_dataset.index)
        assert exc.value.code == "BAD_BITDEPTH"

    def test_missing_ensemble_flag(self, mini_dataset, mini_blend_submission, tmp_path):
        broken = copy_submission(mini_blend_submission, tmp_path / "sub")
        (broken / "submission.json").write_text(json.dumps({"method": "x"}))
        with pytest.raises(SubmissionError) as exc:
            validate_submission(broken, mini_dataset.index)
        assert exc.value.code == "NO_ENSEMBLE_FLAG"

    def test_extra_files_warn_only(self, mini_dataset, mini_blend_submission, tmp_path):
        noisy = copy_submission(mini_blend_submission, tmp_path / "sub")
        (noisy / "seq_0000" / "notes.txt").write_text("hello")
        sub = validate_submission(noisy, mini_dataset.index)
        assert any("EXTRA_FILES" in w for w in sub.warnings)

    def test_zip_archive_accepted(self, mini_dataset, mini_blend_submission, tmp_path):
        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
            for p in sorted(mini_blend_submission.rglob("*")):
                if p.is_file():
                    zf.writestr(str(p.relative_to(mini_blend_submission)), p.read_bytes())
        archive = tmp_path / "sub.zip"
        archive.write_bytes(buf.getvalue())
        sub = validate_submission(archive, mini_dataset.index)
        assert sub.method == "baseline-blend"

    def test_garbage_archive(self, mini_dataset, tmp_path):
        bad = tmp_path / "junk.zip"
        bad.write_bytes(b"this is not a zip")
        with pytest.raises(SubmissionError) as exc:
            validate_submission(bad, mini_dataset.index)
        assert exc.value.code == "BAD_ARCHIVE"


class TestBaselines:
    def test_blend_of_identical_inputs(self):
        rng = np.random.default_rng(0)
        frame = RasterImage(rng.random((8, 8, 3)).astype(np.float32), coded=False)
        out = baseline_interpolate("blend", frame, frame, 0.5)
        assert np.allclose(out.data, frame.data, atol=1e-7)

    def test_repeat_first_returns_first(self):
        rng = np.random.default_rng(1)
        f0 = RasterImage(rng.random((8, 8, 3)).astype(np.float32), coded=False)
        f1 = RasterImage(rng.random((8, 8, 3)).astype(np.float32), coded=False)
        out = baseline_interpolate("repeat_first", f0, f1, 0.5)
        assert np.array_equal(out.data, f0.data)

    def test_oracle_requires_aux(self):
        frame = RasterImage(np.zeros((4, 4, 3), np.float32), coded=False)
        with pytest.raises(ValueError):
            baseline_interpolate("oracle", frame, frame, 0.5)

    def test_oracle_exact_on_integer_translation(self, tmp_path):
        w, h = 64, 32
        bg = background_layer(w, h, margin=16, shift0=(0.0, 0.0), shift1=(8.0, 0.0), seed=11)
        color, alpha = textured_sprite(12, 12, seed=12)
        sprite = make_layer(
            color, alpha,
            GeometricTransform.translation(8.0, 10.0),
            GeometricTransform.translation(24.0, 10.0),
            z=1,
        )
        scene = build_scene(w, h, [bg, sprite])
        cfg = mini_config(canvas_width=w, canvas_height=h, tier_divisors=(1,))
        bundle = generate_sequence(scene, tmp_path, cfg)
        res = bundle.directory / f"res_{w}x{h}"
        f0 = imaging.read_image((res / "frame_0.png").read_bytes())
        f1 = imaging.read_image((res / "frame_8.png").read_bytes())
        gt = imaging.read_image((res / "frame_4.png").read_bytes())
        aux = {
            "flow_to_first": imaging.read_flow_file((res / "flow_t4_to_t0.flo").read_bytes()),
            "flow_to_last": imaging.read_flow_file((res / "flow_t4_to_t8.flo").read_bytes()),
            "occlusion": imaging.read_mask_image((res / "occ_t4.png").read_bytes()),
        }
        pred = baseline_interpolate("oracle", f0, f1, 0.5, aux).to_coded()
        occ = aux["occlusion"]
        zero_occ = occ.valid & (occ.classes == 0)
        assert zero_occ.sum() > 0.8 * occ.valid.sum()
        assert np.array_equal(pred.data[zero_occ], gt.data[zero_occ])


class TestEvaluate:
    def test_perfect_prediction_hits_cap(self, mini_dataset, tmp_path):
        idx = mini_dataset.index
        sub_dir = tmp_path / "perfect"
        for seq in idx.sequences:
            for tier, (w, h) in idx.tiers.items():
                dest = sub_dir / seq / f"res_{w}x{h}"
                dest.mkdir(parents=True)
                for i in range(1, 8):
                    shutil.copyfile(idx.frame_path(seq, tier, i), dest / f"pred_t{i}.png")
        (sub_dir / "submission.json").write_text(
            json.dumps({"method": "copy-gt", "ensembling": False})
        )
        sub = validate_submission(sub_dir, idx)
        report = evaluate_submission(sub, idx)
        for tier in idx.tiers:
            assert report.values[f"{tier}.single.all.psnr_star"] == 100.0
        for i in range(1, 8):
            assert report.values[f"1k.multi.t{i}.psnr_star"] == 100.0
            assert report.values[f"1k.multi.t{i}.psnr_star_sigma"] == 100.0

    def test_blend_on_static_scene_is_perfect(self, tmp_path):
        scene_dir = tmp_path / "static_ds"
        cfg = mini_config(canvas_width=48, canvas_height=24, tier_divisors=(1,), sequence_count=1)
        from conftest import solid_sprite

        bg = background_layer(48, 24, seed=13)
        sprite = make_layer(*solid_sprite(10, 10), GeometricTransform.translation(6.0, 6.0), z=1)
        scene = build_scene(48, 24, [bg, sprite])
        generate_sequence(scene, scene_dir, cfg)
        (scene_dir / "dataset.json").write_text(
            json.dumps(
                {
                    "format_version": 1,
                    "canvas": [48, 24],
                    "tiers": {"4k": [48, 24]},
                    "timesteps": 9,
                    "gt_timesteps": list(range(1, 8)),
                    "sequences": ["seq_0000"],
                    "ground_truth": True,
                }
            )
        )
        idx = load_dataset(scene_dir)
        sub_dir = make_baseline_submission(idx, "blend", tmp_path / "sub", timesteps=(4,))
        report = evaluate_submission(validate_submission(sub_dir, idx), idx)
        assert report.values["4k.single.all.psnr_star"] == 100.0

    def test_oracle_beats_blend(self, mini_dataset, mini_blend_submission, tmp_path):
        idx = mini_dataset.index
        oracle_dir = make_baseline_submission(idx, "oracle", tmp_path / "oracle")
        rep_o = evaluate_submission(validate_submission(oracle_dir, idx), idx)
        rep_b = evaluate_submission(validate_submission(mini_blend_submission, idx), idx)
        for tier in idx.tiers:
            assert (
                rep_o.values[f"{tier}.single.all.psnr_star"]
                > rep_b.values[f"{tier}.single.all.psnr_star"]
            )

    def test_reports_are_deterministic(self, mini_dataset, mini_blend_submission):
        idx = mini_dataset.index
        a = evaluate_submission(validate_submission(mini_blend_submission, idx), idx)
        b = evaluate_submission(validate_submission(mini_blend_submission, idx), idx)
        assert render_report(a, "plain") == render_report(b, "plain")

    def test_masked_equals_unmasked_on_linear_data(self, mini_dataset, mini_blend_submission):
        idx = mini_dataset.index
        report = evaluate_submission(validate_submission(mini_blend_submission, idx), idx)
        for tier in idx.tiers:
            assert report.values[f"{tier}.single.masked97.psnr_star"] == pytest.approx(
                report.values[f"{tier}.single.all.psnr_star"], abs=1e-6
            )

    def test_multi_frame_only_at_configured_tier(self, mini_dataset, mini_blend_submission):
        idx = mini_dataset.index
        report = evaluate_submission(validate_submission(mini_blend_submission, idx), idx)
        multi_keys = [k for k in report.values if ".multi." in k]
        assert multi_keys and all(k.startswith("1k.") for k in multi_keys)

    def test_unknown_tier_rejected(self, mini_dataset, mini_blend_submission):
        idx = mini_dataset.index
        sub = validate_submission(mini_blend_submission, idx)
        from fibench.harness.evaluate import ConfigurationError

        with pytest.raises(ConfigurationError):
            evaluate_submission(sub, idx, EvaluateOptions(tiers=("8k",)))


class TestRenderReport:
    def _report(self, method="m1", score=28.63):
        rep = MetricsReport(method=method, ensembling=False, toolkit_version="0.1.0", schema_version=1)
        rep.values["1k.single.all.count"] = 100
        rep.values["1k.single.all.psnr_star"] = score
        rep.values["1k.single.occ0.count"] = 90
        rep.values["1k.single.occ0.psnr_star"] = score + 2
        rep.values["1k.single.occ1.count"] = 8
        rep.values["1k.single.occ1.psnr_star"] = score - 5
        rep.values["1k.single.occ2.count"] = 2
        rep.values["1k.single.occ2.psnr_star"] = score - 9
        return rep

    def test_single_row(self):
        latex = render_report(self._report(), "latex")
        rows = [ln for ln in latex.splitlines() if ln.strip()]
        assert len(rows) == 1
        assert rows[0].startswith("m1 & 1 & 28.63")

    def test_rank_follows_scores(self):
        latex = render_report([self._report("worse", 25.0), self._report("better", 30.0)], "latex")
        lines = latex.splitlines()
        assert lines[0].startswith("worse & 2")
        assert lines[1].startswith("better & 1")

    def test_csv_round_trip(self):
        import csv as csv_mod

        rep = self._report()
        text = render_report(rep, "csv")
        rows = list(csv_mod.reader(io.StringIO(text)))
        assert rows[0] == ["key", "value"]
        parsed = {k: v for k, v in rows[1:]}
        assert parsed["method"] == "m1"
        assert float(parsed["1k.single.all.psnr_star"]) == pytest.approx(28.63)

    def test_plain_parse_idempotent(self):
        rep = self._report()
        text = render_report(rep, "plain")
        assert render_report(parse_report(text), "plain") == text

    def test_unknown_schema_rejected(self):
        with pytest.raises(ValueError):
            parse_report("fibench-report 99\nmethod x\n")
