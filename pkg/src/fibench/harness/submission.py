"""Submission layout validation.

A submission is a directory or zip archive with::

    submission.json                      {"method": ..., "ensembling": ...}
    seq_<id>/pred_t<i>.png               single-tier layout, or
    seq_<id>/res_<W>x<H>/pred_t<i>.png   multi-tier layout

Every failure class has a distinct code so clients can pre-validate with
the same vocabulary: MISSING_FRAME, BAD_DIMENSIONS, BAD_BITDEPTH,
NO_ENSEMBLE_FLAG, BAD_ARCHIVE; EXTRA_FILES is only a warning.
"""

from __future__ import annotations

import hashlib
import json
import re
import tempfile
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from fibench import imaging
from fibench.harness.dataset import DatasetIndex

_PRED_RE = re.compile(r"^pred_t([1-7])\.png$")
_RES_RE = re.compile(r"^res_(\d+)x(\d+)$")


class SubmissionError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class Submission:
    method: str
    ensembling: bool
    digest: str
    root: Path
    tiers: tuple[str, ...]
    timesteps: tuple[int, ...]
    sequences: tuple[str, ...]
    frames: dict[tuple[str, str, int], Path]
    warnings: tuple[str, ...] = field(default=())

    def load_frame(self, seq: str, tier: str, i: int) -> imaging.RasterImage:
        return imaging.read_image(self.frames[(seq, tier, i)].read_bytes())


def submission_digest(payload: Path) -> str:
    """Content digest: archive bytes for a zip, canonical walk for a directory."""
    payload = Path(payload)
    h = hashlib.sha256()
    if payload.is_file():
        h.update(payload.read_bytes())
        return h.hexdigest()
    for p in sorted(payload.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(payload).as_posix().encode("utf-8"))
            h.update(b"\0")
            h.update(p.read_bytes())
    return h.hexdigest()


def _extract_if_archive(payload: Path) -> Path:
    if payload.is_dir():
        return payload
    if not payload.is_file():
        raise SubmissionError("BAD_ARCHIVE", f"{payload} does not exist")
    tmp = Path(tempfile.mkdtemp(prefix="fibench_sub_"))
    try:
        with zipfile.ZipFile(payload) as zf:
            for info in zf.infolist():
                name = Path(info.filename)
                if name.is_absolute() or ".." in name.parts:
                    raise SubmissionError("BAD_ARCHIVE", f"unsafe path {info.filename}")
            zf.extractall(tmp)
    except zipfile.BadZipFile as exc:
        raise SubmissionError("BAD_ARCHIVE", f"not a zip archive: {exc}") from exc
    return tmp


def _read_metadata(root: Path) -> tuple[str, bool]:
    meta_path = root / "submission.json"
    if not meta_path.is_file():
        raise SubmissionError("NO_ENSEMBLE_FLAG", "submission.json is missing")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SubmissionError("NO_ENSEMBLE_FLAG", f"submission.json unreadable: {exc}") from exc
    if not isinstance(meta.get("ensembling"), bool):
        raise SubmissionError(
            "NO_ENSEMBLE_FLAG",
            "submissions must declare 'ensembling' explicitly as true or false",
        )
    method = meta.get("method")
    if not isinstance(method, str) or not method.strip():
        raise SubmissionError("NO_ENSEMBLE_FLAG", "submission.json lacks a method label")
    return method.strip(), bool(meta["ensembling"])


def _check_png(path: Path, expected: tuple[int, int], seq: str, tier: str, i: int) -> None:
    data = path.read_bytes()
    try:
        info = imaging._scan_png(data)
    except imaging.DecodeError as exc:
        raise SubmissionError(
            "BAD_BITDEPTH", f"{seq} t{i} ({tier}): unreadable image ({exc})"
        ) from exc
    if info.get("bit_depth") != 8 or info.get("color_type") != 2:
        raise SubmissionError(
            "BAD_BITDEPTH",
            f"{seq} t{i} ({tier}): expected 8-bit RGB, got depth "
            f"{info.get('bit_depth')} color type {info.get('color_type')}",
        )
    if (info["width"], info["height"]) != expected:
        raise SubmissionError(
            "BAD_DIMENSIONS",
            f"{seq} t{i} ({tier}): {info['width']}x{info['height']} "
            f"does not match the {expected[0]}x{expected[1]} tier",
        )


def validate_submission(
    payload: Path,
    index: DatasetIndex,
    tiers: tuple[str, ...] | None = None,
    timesteps: tuple[int, ...] | None = None,
) -> Submission:
    """Check coverage, dimensions, and bit depth; compute the content digest.

    ``tiers``/``timesteps`` default to what the payload provides, but
    whatever is provided must then cover every dataset sequence.
    """
    payload = Path(payload)
    digest = submission_digest(payload)
    root = _extract_if_archive(payload)
    method, ensembling = _read_metadata(root)

    size_to_tier = {size: label for label, size in index.tiers.items()}
    warnings: list[str] = []
    found: dict[tuple[str, str, int], Path] = {}
    found_tiers: set[str] = set()
    found_steps: set[int] = set()

    known_seqs = set(index.sequences)
    for entry in sorted(root.rglob("*")):
        if not entry.is_file():
            continue
        rel = entry.relative_to(root)
        if rel.as_posix() == "submission.json":
            continue
        parts = rel.parts
        seq = parts[0]
        pred_match = _PRED_RE.match(parts[-1])
        if seq not in known_seqs or pred_match is None or len(parts) not in (2, 3):
            warnings.append(f"EXTRA_FILES: ignoring {rel.as_posix()}")
            continue
        i = int(pred_match.group(1))
        if len(parts) == 3:
            res_match = _RES_RE.match(parts[1])
            size = (int(res_match.group(1)), int(res_match.group(2))) if res_match else None
            tier = size_to_tier.get(size)
            if tier is None:
                warnings.append(f"EXTRA_FILES: ignoring {rel.as_posix()} (unknown tier)")
                continue
        else:
            tier = None  # flat layout; tier resolved from the image size below
            try:
                info = imaging._scan_png(entry.read_bytes())
                tier = size_to_tier.get((info.get("width"), info.get("height")))
            except imaging.DecodeError:
                tier = None
            if tier is None:
                # Dimension/bit-depth errors are reported against the
                # smallest tier so the failure names the offending frame.
                tier = min(index.tiers, key=lambda k: index.tiers[k][0])
        found[(seq, tier, i)] = entry
        found_tiers.add(tier)
        found_steps.add(i)

    want_tiers = tiers if tiers is not None else tuple(
        label for label in index.tiers if label in found_tiers
    )
    want_steps = timesteps if timesteps is not None else tuple(sorted(found_steps))
    if not want_tiers or not want_steps:
        raise SubmissionError("MISSING_FRAME", "submission contains no prediction frames")

    for seq in index.sequences:
        for tier in want_tiers:
            for i in want_steps:
                path = found.get((seq, tier, i))
                if path is None:
                    raise SubmissionError(
                        "MISSING_FRAME", f"{seq} t{i} ({tier}) is not in the submission"
                    )
                _check_png(path, index.tiers[tier], seq, tier, i)

    return Submission(
        method=method,
        ensembling=ensembling,
        digest=digest,
        root=root,
        tiers=tuple(want_tiers),
        timesteps=tuple(want_steps),
        sequences=tuple(index.sequences),
        frames=found,
        warnings=tuple(warnings),
    )
