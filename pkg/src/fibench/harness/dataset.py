"""Dataset discovery and file access.

A dataset root holds seq_<id> directories (see the generator layout) and
a dataset.json index.  Ground-truth datasets carry all nine frames plus
flows, occlusion masks, and photometric maps; participant exports carry
only frames 0 and 8.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from fibench import imaging

logger = logging.getLogger(__name__)

GT_TIMESTEPS = tuple(range(1, 8))
SINGLE_FRAME_TIMESTEP = 4


class DatasetError(RuntimeError):
    """No usable sequences under the given root."""


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    sequences: tuple[str, ...]
    tiers: dict[str, tuple[int, int]]  # label -> (width, height), largest first
    has_ground_truth: bool
    warnings: tuple[str, ...] = field(default=())

    def res_dir(self, seq: str, tier: str) -> Path:
        w, h = self.tiers[tier]
        return self.root / seq / f"res_{w}x{h}"

    def frame_path(self, seq: str, tier: str, i: int) -> Path:
        return self.res_dir(seq, tier) / f"frame_{i}.png"

    def flow_path(self, seq: str, tier: str, i: int, towards: int) -> Path:
        return self.res_dir(seq, tier) / f"flow_t{i}_to_t{towards}.flo"

    def occ_path(self, seq: str, tier: str, i: int) -> Path:
        return self.res_dir(seq, tier) / f"occ_t{i}.png"

    def phot_path(self, seq: str, tier: str, i: int) -> Path:
        return self.res_dir(seq, tier) / f"phot_t{i}.png"

    def load_frame(self, seq: str, tier: str, i: int) -> imaging.RasterImage:
        return imaging.read_image(self.frame_path(seq, tier, i).read_bytes())

    def load_flow(self, seq: str, tier: str, i: int, towards: int) -> imaging.FlowField:
        return imaging.read_flow_file(self.flow_path(seq, tier, i, towards).read_bytes())

    def load_occ(self, seq: str, tier: str, i: int) -> imaging.OcclusionMask:
        return imaging.read_mask_image(self.occ_path(seq, tier, i).read_bytes())

    def load_phot(self, seq: str, tier: str, i: int) -> imaging.AttributeMap:
        return imaging.read_attribute_image(self.phot_path(seq, tier, i).read_bytes())


def _required_files(seq_dir: Path, tiers: dict[str, tuple[int, int]], full: bool) -> list[Path]:
    needed = [seq_dir / "meta.json"]
    for w, h in tiers.values():
        res = seq_dir / f"res_{w}x{h}"
        frame_ids = range(9) if full else (0, 8)
        needed.extend(res / f"frame_{i}.png" for i in frame_ids)
        if full:
            for i in GT_TIMESTEPS:
                needed.append(res / f"flow_t{i}_to_t0.flo")
                needed.append(res / f"flow_t{i}_to_t8.flo")
                needed.append(res / f"occ_t{i}.png")
                needed.append(res / f"phot_t{i}.png")
    return needed


def _tiers_from_scan(root: Path, seq_name: str) -> dict[str, tuple[int, int]]:
    sizes = []
    for res in sorted((root / seq_name).glob("res_*x*")):
        try:
            w, h = (int(v) for v in res.name[len("res_") :].split("x"))
        except ValueError:
            continue
        sizes.append((w, h))
    sizes.sort(key=lambda s: -s[0])
    names = ["4k", "2k", "1k"]
    out = {}
    for i, size in enumerate(sizes):
        label = names[i] if i < len(names) else f"tier{i}"
        out[label] = size
    return out


def load_dataset(root: Path) -> DatasetIndex:
    """Index the complete sequences under root; skip and report gaps."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")

    index_file = root / "dataset.json"
    if index_file.is_file():
        meta = json.loads(index_file.read_text(encoding="utf-8"))
        tiers = {label: (int(w), int(h)) for label, (w, h) in meta["tiers"].items()}
        tiers = dict(sorted(tiers.items(), key=lambda kv: -kv[1][0]))
        candidates = list(meta["sequences"])
        full = bool(meta.get("ground_truth", True))
    else:
        candidates = sorted(p.name for p in root.glob("seq_*") if p.is_dir())
        if not candidates:
            raise DatasetError(f"no sequences under {root}")
        tiers = _tiers_from_scan(root, candidates[0])
        if not tiers:
            raise DatasetError(f"no resolution tiers under {root}/{candidates[0]}")
        full = any(root.joinpath(candidates[0]).rglob("flow_*.flo"))

    complete = []
    warnings = []
    for seq in candidates:
        missing = [p for p in _required_files(root / seq, tiers, full) if not p.is_file()]
        if missing:
            rel = ", ".join(str(p.relative_to(root)) for p in missing[:3])
            more = f" (+{len(missing) - 3} more)" if len(missing) > 3 else ""
            warnings.append(f"skipping {seq}: missing {rel}{more}")
            continue
        complete.append(seq)
    for w in warnings:
        logger.warning("%s", w)
    if not complete:
        raise DatasetError(f"no complete sequences under {root}")
    return DatasetIndex(
        root=root,
        sequences=tuple(complete),
        tiers=tiers,
        has_ground_truth=full,
        warnings=tuple(warnings),
    )
