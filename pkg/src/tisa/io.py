"""File formats.

MatrixFile (``.tmx``), all integers little-endian::

    offset  size  field
    0       4     magic b"TMX1"
    4       1     dtype, 2 = float64 (the only accepted value)
    5       3     reserved, zero
    8       8     rows (uint64)
    16      8     cols (uint64)
    24      8*rows*cols  row-major float64 payload

Bundle manifest (JSON)::

    {"n": .., "d": .., "d_k": .., "H": .., "L": ..,
     "e_p": "e_p.tmx", "e_w": "e_w.tmx",
     "projections": [{"layer": 0, "head": 0, "w_q": "..", "w_k": ".."}, ...]}

Relative paths resolve against the manifest's directory. Projection pairs
pointing at the same files (shared weights) are loaded once.

CSV exports use ``.`` as the decimal separator and 17 significant digits.
"""

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError
from .introspect import EmbeddingBundle
from .attention import TisaStack
from .model.transformer import ToyModelConfig, tisa_stack

MAGIC = b"TMX1"
DTYPE_F64 = 2
_HEADER = struct.Struct("<4sB3sQQ")


class FormatError(ValueError):
    """A file does not follow its documented format."""


def write_matrix(path, m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"only 2-D matrices can be stored, got shape {m.shape}")
    header = _HEADER.pack(MAGIC, DTYPE_F64, b"\0\0\0", m.shape[0], m.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, dtype, reserved, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if dtype != DTYPE_F64:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if reserved != b"\0\0\0":
        raise FormatError(f"{path}: reserved header bytes are not zero")
    if rows == 0 or cols == 0:
        raise FormatError(f"{path}: empty matrix {rows}x{cols}")
    expected = _HEADER.size + 8 * rows * cols
    if len(blob) != expected:
        raise FormatError(f"{path}: {len(blob)} bytes, expected {expected} for {rows}x{cols}")
    m = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise FormatError(f"{path}: payload contains NaN or infinite values")
    return m.astype(np.float64)


def fmt(x):
    """17 significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def heatmap_rows(m):
    n_rows, n_cols = m.shape
    for i in range(n_rows):
        for j in range(n_cols):
            yield i, j, m[i, j]


def read_profile_csv(path):
    """(offsets, values) from an ``offset,value`` CSV; a header line is optional."""
    offsets, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                k, v = int(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise FormatError(f"{path}:{lineno}: cannot parse {row!r}") from None
            if not np.isfinite(v):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            offsets.append(k)
            values.append(v)
    if not offsets:
        raise FormatError(f"{path}: no (offset, value) rows")
    if len(set(offsets)) != len(offsets):
        raise FormatError(f"{path}: duplicate offsets")
    return np.asarray(offsets, dtype=np.int64), np.asarray(values, dtype=np.float64)


def load_bundle(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        dims = {k: int(doc[k]) for k in ("n", "d", "d_k", "H", "L")}
        entries = doc["projections"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed manifest ({exc})") from None
    base = path.parent
    cache = {}

    def matrix(rel):
        full = (base / rel).resolve()
        if full not in cache:
            cache[full] = read_matrix(full)
        return cache[full]

    e_p, e_w = matrix(doc["e_p"]), matrix(doc["e_w"])
    if e_p.shape != (dims["n"], dims["d"]):
        raise FormatError(f"{path}: e_p is {e_p.shape}, header says n={dims['n']}, d={dims['d']}")
    if e_w.shape[1] != dims["d"]:
        raise FormatError(f"{path}: e_w has width {e_w.shape[1]}, header says d={dims['d']}")
    projections = {}
    for entry in entries:
        key = (int(entry["layer"]), int(entry["head"]))
        w_q, w_k = matrix(entry["w_q"]), matrix(entry["w_k"])
        for name, w in (("w_q", w_q), ("w_k", w_k)):
            if w.shape != (dims["d"], dims["d_k"]):
                raise FormatError(f"{path}: {name} of {key} is {w.shape}, expected "
                                  f"{dims['d']}x{dims['d_k']}")
        projections[key] = (w_q, w_k)
    try:
        return EmbeddingBundle(e_p, e_w, projections, H=dims["H"], L=dims["L"])
    except (ShapeError, DomainError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_bundle(path, bundle):
    """Write a bundle as a manifest plus ``.tmx`` files next to it."""
    path = Path(path)
    base = path.parent
    write_matrix(base / "e_p.tmx", bundle.e_p)
    write_matrix(base / "e_w.tmx", bundle.e_w)
    entries = []
    for (layer, head) in sorted(bundle.projections):
        w_q, w_k = bundle.projections[layer, head]
        q_name, k_name = f"w_q_l{layer}_h{head}.tmx", f"w_k_l{layer}_h{head}.tmx"
        write_matrix(base / q_name, w_q)
        write_matrix(base / k_name, w_k)
        entries.append({"layer": layer, "head": head, "w_q": q_name, "w_k": k_name})
    doc = {"n": bundle.n, "d": bundle.d, "d_k": bundle.d_k, "H": bundle.H, "L": bundle.L,
           "e_p": "e_p.tmx", "e_w": "e_w.tmx", "projections": entries}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def save_checkpoint(directory, config, params):
    """Write a toy-model checkpoint.

    Ordinary tensors go to ``tensors/<name>.tmx``; positional kernels go to
    ``kernels.json``; ``manifest.json`` records the config and ties them together.
    """
    directory = Path(directory)
    (directory / "tensors").mkdir(parents=True, exist_ok=True)
    tensors = {}
    for name in sorted(params):
        if ".tisa." in name:
            continue
        rel = f"tensors/{name}.tmx"
        write_matrix(directory / rel, params[name])
        tensors[name] = rel
    tisa_stack(config, params).save(directory / "kernels.json")
    manifest = {"config": asdict(config), "tensors": tensors, "kernels": "kernels.json"}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")


def load_checkpoint(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    config = ToyModelConfig(**manifest["config"])
    params = {name: read_matrix(directory / rel) for name, rel in manifest["tensors"].items()}
    stack = TisaStack.load(directory / manifest["kernels"])
    for (layer, head), k in stack.kernels.items():
        for part, arr in (("amp", k.amp), ("width", k.width), ("center", k.center)):
            params[f"l{layer}.h{head}.tisa.{part}"] = arr.reshape(1, -1)
    return config, params
