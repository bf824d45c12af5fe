"""On-disk formats.

Binary files start with one line of canonical JSON (sorted keys, no spaces)
carrying a ``magic`` tag, followed by a little-endian payload:

* ``OHDS1`` descriptors: ``{magic, n, dim, dtype: "f32", order: "row-major"}`` + float32 blob
* ``OHCB1`` codebook: ``{magic, classes, bits, method, seed}`` + packed rows (uint64 words)
* ``OHIX1`` index and ``OHPC1`` packed codes: ``{magic, bits, count}`` + (int64 id, words) records
* ``OHMD1`` model: the whole file is the JSON line, floats written as shortest round-trip decimals

Labels are text lines ``id,class[;class...]``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .codebook import Codebook
from .encoder import EncoderParams
from .hamming import n_words, unpack_codes
from .retrieval import HammingIndex

DESCRIPTORS, CODEBOOK, INDEX, CODES, MODEL = "OHDS1", "OHCB1", "OHIX1", "OHPC1", "OHMD1"
MAGICS = (DESCRIPTORS, CODEBOOK, INDEX, CODES, MODEL)


class FormatError(ValueError):
    pass


def canonical_json(obj, indent=None) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":") if indent is None else None,
                      indent=indent, allow_nan=False)


def _write(path, header: dict, payload: bytes = b"") -> None:
    Path(path).write_bytes(canonical_json(header).encode() + b"\n" + payload)


def _read(path, magic: str | None = None):
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: header is not JSON") from exc
    found = header.get("magic") if isinstance(header, dict) else None
    if found not in MAGICS:
        raise FormatError(f"{path}: unrecognized magic {found!r}")
    if magic is not None and found != magic:
        raise FormatError(f"{path}: expected {magic} file, found {found}")
    return header, raw[nl + 1:]


def file_magic(path) -> str:
    return _read(path)[0]["magic"]


def save_descriptors(path, x) -> None:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("descriptors must be a 2-D array")
    header = {"magic": DESCRIPTORS, "n": int(x.shape[0]), "dim": int(x.shape[1]),
              "dtype": "f32", "order": "row-major"}
    _write(path, header, np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_descriptors(path) -> np.ndarray:
    header, payload = _read(path, DESCRIPTORS)
    n, dim = header["n"], header["dim"]
    if header.get("dtype") != "f32" or header.get("order") != "row-major":
        raise FormatError(f"{path}: only row-major f32 descriptors are supported")
    if len(payload) != 4 * n * dim:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {4 * n * dim}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float64)


def save_codebook(path, cb: Codebook) -> None:
    header = {"magic": CODEBOOK, "classes": cb.classes, "bits": cb.bits,
              "method": cb.method, "seed": cb.seed}
    _write(path, header, cb.packed_rows.astype("<u8").tobytes())


def load_codebook(path) -> Codebook:
    header, payload = _read(path, CODEBOOK)
    c, k = header["classes"], header["bits"]
    expected = 8 * c * n_words(k)
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    words = np.frombuffer(payload, dtype="<u8").reshape(c, n_words(k))
    return Codebook(unpack_codes(words, k), header["method"], header["seed"])


def _record_dtype(bits):
    return np.dtype([("id", "<i8"), ("words", "<u8", (n_words(bits),))])


def _save_records(path, magic, bits, ids, words) -> None:
    ids = np.asarray(ids, dtype=np.int64)
    rec = np.empty(ids.size, dtype=_record_dtype(bits))
    rec["id"] = ids
    rec["words"] = np.asarray(words, dtype=np.uint64).reshape(ids.size, n_words(bits))
    _write(path, {"magic": magic, "bits": int(bits), "count": int(ids.size)}, rec.tobytes())


def _load_records(path, magic):
    header, payload = _read(path, magic)
    bits, count = header["bits"], header["count"]
    dt = _record_dtype(bits)
    if len(payload) != dt.itemsize * count:
        raise FormatError(f"{path}: payload size does not match {count} records")
    rec = np.frombuffer(payload, dtype=dt)
    return bits, rec["id"].astype(np.int64), rec["words"].astype(np.uint64).reshape(count, n_words(bits))


def save_index(path, index: HammingIndex) -> None:
    _save_records(path, INDEX, index.bits, index.ids, index.words)


def load_index(path) -> HammingIndex:
    return HammingIndex(*_load_records(path, INDEX))


def save_codes(path, bits: int, ids, words) -> None:
    _save_records(path, CODES, bits, ids, words)


def load_codes(path):
    """Returns ``(bits, ids, words)``."""
    return _load_records(path, CODES)


def model_to_dict(params: EncoderParams) -> dict:
    arrays = {name: a.tolist() for name, a in params.named_arrays().items()}
    if not params.batch_norm:
        arrays["bn.gamma"] = params.bn_gamma.tolist()
        arrays["bn.beta"] = params.bn_beta.tolist()
    arrays["bn.running_mean"] = params.bn_running_mean.tolist()
    arrays["bn.running_var"] = params.bn_running_var.tolist()
    return {
        "magic": MODEL,
        "architecture": {"input_dim": params.input_dim, "hidden": params.hidden, "bits": params.bits,
                         "batch_norm": params.batch_norm, "l2_normalize": params.l2_normalize},
        "bn": {"momentum": params.bn_momentum, "epsilon": params.bn_epsilon},
        "params": arrays,
    }


def model_from_dict(d: dict) -> EncoderParams:
    if d.get("magic") != MODEL:
        raise FormatError("not a model description")
    arch, p = d["architecture"], d["params"]
    arr = lambda name: np.array(p[name], dtype=np.float64)  # noqa: E731
    layers = [(arr(f"mlp.{i}.weight"), arr(f"mlp.{i}.bias")) for i in range(len(arch["hidden"]))]
    params = EncoderParams(
        mlp_layers=layers,
        latent_weight=arr("latent.weight"),
        bn_gamma=arr("bn.gamma"),
        bn_beta=arr("bn.beta"),
        bn_running_mean=arr("bn.running_mean"),
        bn_running_var=arr("bn.running_var"),
        bn_momentum=float(d["bn"]["momentum"]),
        bn_epsilon=float(d["bn"]["epsilon"]),
        batch_norm=bool(arch["batch_norm"]),
        l2_normalize=bool(arch["l2_normalize"]),
    )
    if params.input_dim != arch["input_dim"] or params.bits != arch["bits"]:
        raise FormatError("model arrays disagree with the declared architecture")
    return params


def save_model(path, params: EncoderParams) -> None:
    Path(path).write_text(canonical_json(model_to_dict(params)) + "\n")


def load_model(path) -> EncoderParams:
    header, rest = _read(path, MODEL)
    if rest.strip():
        raise FormatError(f"{path}: trailing data after model JSON")
    return model_from_dict(header)


def save_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj, indent=2) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def save_labels(path, ids, label_sets) -> None:
    lines = [f"{int(i)},{';'.join(str(c) for c in sorted(s))}" for i, s in zip(ids, label_sets)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_labels(path) -> dict:
    """``{id: tuple of classes}`` in file order."""
    out = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'id,class[;class...]'")
            try:
                key = int(row[0])
                classes = tuple(sorted({int(c) for c in row[1].split(";")}))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer id or class") from exc
            if key in out:
                raise FormatError(f"{path}:{lineno}: duplicate id {key}")
            if any(c < 0 for c in classes):
                raise FormatError(f"{path}:{lineno}: negative class")
            out[key] = classes
    return out


def save_histograms(path, edges, intra, inter) -> None:
    rows = ["bin_low,bin_high,intra_freq,inter_freq"]
    for lo, hi, a, b in zip(edges[:-1], edges[1:], intra, inter):
        rows.append(f"{int(lo)},{int(hi)},{float(a)!r},{float(b)!r}")
    Path(path).write_text("\n".join(rows) + "\n")


def _rewrite(path_in, path_out) -> None:
    magic = file_magic(path_in)
    if magic == DESCRIPTORS:
        save_descriptors(path_out, load_descriptors(path_in))
    elif magic == CODEBOOK:
        save_codebook(path_out, load_codebook(path_in))
    elif magic == INDEX:
        save_index(path_out, load_index(path_in))
    elif magic == CODES:
        save_codes(path_out, *load_codes(path_in))
    else:
        save_model(path_out, load_model(path_in))


def roundtrip_check(path_in, path_out) -> bool:
    """Read a toolkit file, write it back out, and compare bytes."""
    _rewrite(path_in, path_out)
    return Path(path_in).read_bytes() == Path(path_out).read_bytes()
