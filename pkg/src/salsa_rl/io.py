"""Serialisation of models, trajectories and analysis reports; run directories.

All documents are JSON written with sorted keys and Python's shortest
round-trip float representation, so ``save -> load -> save`` reproduces the
same bytes. Non-finite floats are encoded as the strings ``"inf"``,
``"-inf"`` and ``"nan"`` to keep the files strict JSON.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderParams
from .envs import EnvConfig
from .nn import Layer, MlpParams
from .policy import SalsaPolicy, Trajectory
from .stability.spectral import spectral_series
from .trainer import TrainConfig

FORMAT_VERSION = 1
BUNDLE_KIND = "salsa-model-bundle"
AE_KIND = "salsa-autoencoder"


class BundleError(ValueError):
    """Corrupt, tampered or incompatible model file."""


# ---------------------------------------------------------------------------
# canonical JSON


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps(obj) -> str:
    """Human-readable but deterministic JSON text."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _float_or_special(x) -> float:
    # float() also parses the "inf" / "-inf" / "nan" strings written by _jsonable
    return float(x)


# ---------------------------------------------------------------------------
# networks


def mlp_to_dict(params: MlpParams) -> dict:
    return {"layers": [
        {"shape": list(l.weight.shape), "activation": l.activation,
         "weight": l.weight.ravel().tolist(), "bias": l.bias.tolist()}
        for l in params.layers
    ]}


def mlp_from_dict(d: dict) -> MlpParams:
    layers = []
    for k, ld in enumerate(d["layers"]):
        shape = tuple(int(s) for s in ld["shape"])
        w = np.array(ld["weight"], dtype=float)
        if w.size != shape[0] * shape[1]:
            raise BundleError(f"layer {k}: {w.size} weights do not fill shape {shape}")
        layers.append(Layer(w.reshape(shape), np.array(ld["bias"], dtype=float), ld["activation"]))
    return MlpParams(layers)


def autoencoder_to_dict(ae: AutoencoderParams) -> dict:
    return {
        "encoder": mlp_to_dict(ae.encoder), "decoder": mlp_to_dict(ae.decoder),
        "action_low": ae.action_low, "action_high": ae.action_high,
        "heldout_mse": ae.heldout_mse, "frozen": ae.frozen,
    }


def autoencoder_from_dict(d: dict) -> AutoencoderParams:
    mse = d.get("heldout_mse")
    return AutoencoderParams(
        mlp_from_dict(d["encoder"]), mlp_from_dict(d["decoder"]),
        np.array(d["action_low"], dtype=float), np.array(d["action_high"], dtype=float),
        frozen=bool(d.get("frozen", True)), heldout_mse=None if mse is None else _float_or_special(mse),
    )


def _seal(doc: dict) -> dict:
    doc = dict(doc)
    doc.pop("content_hash", None)
    doc["content_hash"] = hashlib.sha256(canonical_json(doc).encode()).hexdigest()
    return doc


def _unseal(doc: dict, kind: str) -> dict:
    if doc.get("kind") != kind:
        raise BundleError(f"expected a {kind} document, found {doc.get('kind')!r}")
    if doc.get("format_version") != FORMAT_VERSION:
        raise BundleError(f"format version {doc.get('format_version')!r} is not supported "
                          f"(this build reads version {FORMAT_VERSION})")
    body = dict(doc)
    stored = body.pop("content_hash", None)
    actual = hashlib.sha256(canonical_json(body).encode()).hexdigest()
    if stored != actual:
        raise BundleError("content hash mismatch; the file was modified or is corrupt")
    return body


def save_autoencoder(path, ae: AutoencoderParams, env_id: str, extra: dict | None = None) -> Path:
    doc = {"kind": AE_KIND, "format_version": FORMAT_VERSION, "env_id": env_id, "h_d": ae.h_d,
           "autoencoder": autoencoder_to_dict(ae), "extra": extra or {}}
    return write_json(path, _seal(doc))


def load_autoencoder(path) -> tuple[AutoencoderParams, dict]:
    body = _unseal(read_json(path), AE_KIND)
    return autoencoder_from_dict(body["autoencoder"]), body


# ---------------------------------------------------------------------------
# model bundle


@dataclass
class ModelBundle:
    env_id: str
    policy: SalsaPolicy
    critic: MlpParams | None
    env_config: EnvConfig
    train_config: TrainConfig
    extra: dict | None = None
    content_hash: str | None = None

    @property
    def h_d(self) -> int:
        return self.policy.h_d

    def to_dict(self) -> dict:
        doc = {
            "kind": BUNDLE_KIND, "format_version": FORMAT_VERSION, "env_id": self.env_id, "h_d": self.h_d,
            "env_config": self.env_config.to_dict(), "train_config": self.train_config.to_dict(),
            "autoencoder": autoencoder_to_dict(self.policy.autoencoder),
            "dynamics": mlp_to_dict(self.policy.dynamics),
            "critic": None if self.critic is None else mlp_to_dict(self.critic),
            "extra": self.extra or {},
        }
        return _seal(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelBundle":
        body = _unseal(doc, BUNDLE_KIND)
        ae = autoencoder_from_dict(body["autoencoder"])
        policy = SalsaPolicy(ae, mlp_from_dict(body["dynamics"]))
        if policy.h_d != body["h_d"]:
            raise BundleError(f"declared h_d={body['h_d']} but weights imply {policy.h_d}")
        critic = None if body["critic"] is None else mlp_from_dict(body["critic"])
        return cls(body["env_id"], policy, critic, EnvConfig(**body["env_config"]),
                   TrainConfig.from_dict(body["train_config"]), body.get("extra") or {}, doc["content_hash"])


def save_bundle(path, bundle: ModelBundle) -> Path:
    doc = bundle.to_dict()
    bundle.content_hash = doc["content_hash"]
    return write_json(path, doc)


def load_bundle(path) -> ModelBundle:
    try:
        doc = read_json(path)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}: not valid JSON ({exc})") from None
    return ModelBundle.from_dict(doc)


# ---------------------------------------------------------------------------
# trajectories

_TRAJ_ARRAYS = ("states", "observations", "prev_actions", "actions", "raw_actions", "z_before", "z_after",
                "A", "rewards", "terminated", "truncated", "masked")


def trajectory_to_dict(traj: Trajectory, extra: dict | None = None) -> dict:
    rho, im = spectral_series(traj.A)
    doc = {name: getattr(traj, name) for name in _TRAJ_ARRAYS}
    doc.update(env_id=traj.env_id, seed=traj.seed, initial_state=traj.initial_state,
               final_state=traj.final_state, rho=rho, im_max=im, extra=extra or {})
    return doc


def trajectory_from_dict(d: dict) -> Trajectory:
    arrays = {}
    for name in _TRAJ_ARRAYS:
        dtype = bool if name in ("terminated", "truncated", "masked") else float
        arrays[name] = np.array(d[name], dtype=dtype)
    h = arrays["z_before"].shape[1] if arrays["z_before"].ndim == 2 else 0
    arrays["A"] = arrays["A"].reshape(len(arrays["rewards"]), h, h)
    final = d.get("final_state")
    return Trajectory(d["env_id"], d.get("seed"), np.array(d["initial_state"], dtype=float),
                      final_state=None if final is None else np.array(final, dtype=float), **arrays)


def export_trajectory(stem, traj: Trajectory, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (one row per step) and the ``<stem>.json`` sidecar with all matrices."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    doc = trajectory_to_dict(traj, extra)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    obs_cols = [f"state_{i}" for i in range(traj.observations.shape[1])]
    act_cols = [f"action_{i}" for i in range(traj.actions.shape[1])]
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *obs_cols, *act_cols, "reward", "rho", "im_max"])
        for t in range(len(traj)):
            w.writerow([t, *map(repr, map(float, traj.observations[t])), *map(repr, map(float, traj.actions[t])),
                        repr(float(traj.rewards[t])), repr(float(doc["rho"][t])), repr(float(doc["im_max"][t]))])
    write_json(json_path, doc)
    return csv_path, json_path


def load_trajectory(path) -> Trajectory:
    """Load from the JSON sidecar (``path`` may name the CSV or the sidecar)."""
    path = Path(path)
    return trajectory_from_dict(read_json(path.with_suffix(".json")))


def read_trajectory_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}


def write_curve_csv(path, curve: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "return", "eval_return"])
        for row in curve:
            ev = row.get("eval_return")
            w.writerow([row["episode"], repr(float(row["return"])), "" if ev is None else repr(float(ev))])
    return path


# ---------------------------------------------------------------------------
# run directories and manifests


def package_versions() -> dict:
    out = {"python": platform.python_version()}
    for name in ("artifact", "numpy", "scipy", "scikit-image"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = None
    return out


def make_run_dir(root, seed: int, now: datetime | None = None) -> Path:
    """``<root>/<UTC timestamp>_seed<seed>``; a numeric suffix avoids collisions."""
    now = now or datetime.now(timezone.utc)
    base = Path(root) / f"{now.strftime('%Y%m%dT%H%M%S')}_seed{seed}"
    path, k = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}_{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def write_manifest(run_dir, command: str, argv: list[str], config: dict, seed: int,
                   inputs: dict | None = None, outputs: dict | None = None, status: str = "started") -> Path:
    """Record everything needed to rerun ``command``; inputs are hashed by content."""
    doc = {
        "command": command, "argv": list(argv), "config": config, "seed": seed, "status": status,
        "versions": package_versions(), "platform": platform.platform(), "executable": sys.executable,
        "inputs": {k: {"path": str(p), "sha256": file_sha256(p)} for k, p in (inputs or {}).items()},
        "outputs": {k: str(p) for k, p in (outputs or {}).items()},
    }
    return write_json(Path(run_dir) / "manifest.json", doc)
