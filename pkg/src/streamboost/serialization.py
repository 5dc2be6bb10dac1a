"""Versioned binary model snapshots.

Layout: 8-byte magic, little-endian u32 format version, u64 header length,
a UTF-8 JSON header, then every array's raw little-endian bytes back to back.
The header records the model type, scalar fields, one entry per learner
(kind tag, hyperparameters, array names) and each array's dtype, shape and
byte offset.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .averaging import ParamAverage, SnapshotAverage, ThinnedSnapshots
from .batch_gb import BatchGBModel, StageLog
from .losses import LossSpec
from .sgb_nonsmooth import SGBResidual
from .sgb_smooth import SGBSmooth
from .weak_learners import learner_from_state

MAGIC = b"STRMBST\x00"
VERSION = 1


class ModelFormatError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.arrays = []
        self.index = []
        self.offset = 0

    def add(self, arr) -> int:
        arr = np.asarray(arr)
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        self.index.append({"dtype": dtype, "shape": list(arr.shape), "offset": self.offset,
                           "nbytes": len(data)})
        self.arrays.append(data)
        self.offset += len(data)
        return len(self.index) - 1

    def learner(self, l) -> dict:
        return {"kind": l.kind, "hyper": l.hyperparams(),
                "arrays": {k: self.add(v) for k, v in l.state_arrays().items()}}


def _loss_dict(loss: LossSpec) -> dict:
    return {"kind": loss.kind, "reg_lambda": loss.reg_lambda, "m": loss.m,
            "domain_bound": loss.domain_bound, "target_bound": loss.target_bound}


def _encode(model, w: _Writer) -> dict:
    if isinstance(model, SGBSmooth):
        avgs = []
        for a in model.averages:
            if isinstance(a, ParamAverage):
                avgs.append({"type": "param", "count": a.count,
                             "total": None if a.total is None else w.add(a.total)})
            else:
                avgs.append({"type": "snapshots", "capacity": a.capacity, "stride": a.stride,
                             "count": a.count, "times": a.times,
                             "items": [w.learner(s) for s in a.items]})
        return {"model": "sgb_smooth", "eta": model.eta, "t": model.t, "guard": model.guard,
                "y0": w.add(model.y0), "averages": avgs}
    if isinstance(model, SGBResidual):
        store = model.snapshot_store
        snaps = None
        if store is not None:
            snaps = {"capacity": store.capacity, "stride": store.stride, "count": store.count,
                     "times": store.times,
                     "items": [[w.learner(l) for l in snap] for snap in store.items]}
        return {"model": "sgb_residual", "radius": model.radius, "lambda_sc": model.lambda_sc,
                "avg_denominator": model.avg_denominator, "t": model.t, "y0": w.add(model.y0),
                "snapshots": snaps, "stats_T": model.stats.T,
                "sum_sq_resid": w.add(model.stats.sum_sq_resid),
                "sum_sq_pred": w.add(model.stats.sum_sq_pred)}
    if isinstance(model, BatchGBModel):
        return {"model": "batch_gb", "eta": model.eta, "y0": w.add(model.y0),
                "cost_units": model.cost_units,
                "stages": [{"passes": s.passes, "samples": s.samples, "pass_losses": s.pass_losses}
                           for s in model.stages],
                "hypotheses": [w.learner(h) for h in model.hypotheses]}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def to_bytes(model, extra: dict | None = None) -> bytes:
    w = _Writer()
    header = _encode(model, w)
    header["loss"] = _loss_dict(model.loss)
    if not isinstance(model, BatchGBModel):
        header["learners"] = [w.learner(l) for l in model.learners]
    header["extra"] = extra or {}
    header["arrays"] = w.index
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(blob)) + blob + b"".join(w.arrays)


def save_model(path, model, extra: dict | None = None):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model, extra))


def from_bytes(data: bytes):
    """Return (model, extra) from :func:`to_bytes` output."""
    if data[:8] != MAGIC:
        raise ModelFormatError("not a streamboost model file")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    header = json.loads(data[20:20 + hlen].decode("utf-8"))
    base = 20 + hlen

    def arr(i):
        meta = header["arrays"][i]
        start = base + meta["offset"]
        a = np.frombuffer(data[start:start + meta["nbytes"]], dtype=meta["dtype"])
        return a.reshape(meta["shape"]).astype(np.float64 if meta["dtype"] == "<f8" else np.int64)

    def learner(rec):
        return learner_from_state(rec["kind"], rec["hyper"],
                                  {k: arr(i) for k, i in rec["arrays"].items()})

    loss = LossSpec(**header["loss"])
    kind = header["model"]
    if kind == "sgb_smooth":
        learners = [learner(r) for r in header["learners"]]
        model = SGBSmooth(learners, header["eta"], loss, y0=arr(header["y0"]),
                          guard=header["guard"], allow_nonsmooth=not loss.smooth)
        model.t = header["t"]
        avgs = []
        for rec in header["averages"]:
            if rec["type"] == "param":
                a = ParamAverage()
                a.count = rec["count"]
                a.total = None if rec["total"] is None else arr(rec["total"])
            else:
                a = SnapshotAverage(rec["capacity"])
                a.stride, a.count, a.times = rec["stride"], rec["count"], list(rec["times"])
                a.items = [learner(r) for r in rec["items"]]
            avgs.append(a)
        model.averages = avgs
    elif kind == "sgb_residual":
        learners = [learner(r) for r in header["learners"]]
        snaps = header["snapshots"]
        model = SGBResidual(learners, loss, header["radius"], y0=arr(header["y0"]),
                            lambda_sc=header["lambda_sc"],
                            avg_denominator=header["avg_denominator"],
                            snapshots=snaps["capacity"] if snaps else 0)
        model.t = header["t"]
        model.stats.T = header["stats_T"]
        model.stats.sum_sq_resid = arr(header["sum_sq_resid"])
        model.stats.sum_sq_pred = arr(header["sum_sq_pred"])
        if snaps:
            store = ThinnedSnapshots(snaps["capacity"])
            store.stride, store.count, store.times = snaps["stride"], snaps["count"], list(snaps["times"])
            store.items = [[learner(r) for r in snap] for snap in snaps["items"]]
            model.snapshot_store = store
    elif kind == "batch_gb":
        model = BatchGBModel(loss, header["eta"], arr(header["y0"]))
        model.hypotheses = [learner(r) for r in header["hypotheses"]]
        model.stages = [StageLog(s["passes"], s["samples"], s["pass_losses"]) for s in header["stages"]]
        model.cost_units = header["cost_units"]
    else:
        raise ModelFormatError(f"unknown model type {kind!r}")
    return model, header["extra"]


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def dump_text(model) -> str:
    """Human-readable parameter listing (not read back)."""
    w = _Writer()
    header = _encode(model, w)
    lines = [f"model: {header['model']}", f"loss: {model.loss.kind} reg_lambda={model.loss.reg_lambda!r}"]
    learners = model.hypotheses if isinstance(model, BatchGBModel) else model.learners
    for key in ("eta", "radius", "lambda_sc", "avg_denominator", "t"):
        if key in header:
            lines.append(f"{key}: {header[key]!r}")
    lines.append(f"y0: {np.array2string(model.y0, precision=9)}")
    for i, l in enumerate(learners, start=1):
        lines.append(f"learner {i}: {l.kind} {json.dumps(l.hyperparams(), sort_keys=True)}")
        for name, a in l.state_arrays().items():
            if name in ("X", "Y"):
                continue
            lines.append(f"  {name} {list(np.shape(a))}: "
                         f"{np.array2string(np.asarray(a), precision=9, threshold=64)}")
    return "\n".join(lines) + "\n"
