"""RIR files: 32-bit float mono WAV plus a JSON sidecar with the same stem."""
import json
from pathlib import Path

from ..wavio import read_wav, write_wav
from .models import Rir, kind_from_dict, kind_to_dict


def sidecar_path(wav_path):
    return Path(wav_path).with_suffix(".json")


def write_rir(rir, path, rt60_est=None, extra=None):
    path = Path(path)
    write_wav(path, rir.samples, rir.sample_rate, subtype="FLOAT")
    meta = {
        "scenario_id": rir.scenario_id,
        "model": kind_to_dict(rir.model),
        "sample_rate": rir.sample_rate,
        "n_samples": len(rir),
        "peak_index": rir.peak_index,
        "rt60_est": rt60_est,
        **{k: v for k, v in rir.meta.items()},
        **(extra or {}),
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_rir(path):
    """Load a RIR; without a sidecar it is treated as measured (peak at max |h|)."""
    h, sr = read_wav(path)
    side = sidecar_path(path)
    if not side.exists():
        return Rir.measured(h, sr, scenario_id=Path(path).stem)
    meta = json.loads(side.read_text())
    return Rir(h, sr, kind_from_dict(meta["model"]), meta["scenario_id"], int(meta["peak_index"]),
               {k: v for k, v in meta.items()
                if k not in ("scenario_id", "model", "sample_rate", "n_samples", "peak_index")})
