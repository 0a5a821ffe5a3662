"""Vector batch files.

Binary (``f64le``): magic ``b"SJLT1"``, then ``count`` and ``dim`` as
little-endian uint64, then ``count * dim`` little-endian float64 values,
row-major, no padding.

CSV: one vector per line, values written with 17 significant digits so the
round trip is exact.  An optional first line ``#SJLT1,count,dim`` is written
by :func:`write_csv` and checked by :func:`read_csv` when present.
"""

import struct

import numpy as np

MAGIC = b"SJLT1"
_HEADER = struct.Struct("<QQ")


class VectorFileError(ValueError):
    pass


def _as_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise VectorFileError("expected a 2-D (count, dim) array")
    return X


def write_f64le(path, X) -> None:
    X = _as_batch(X)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(*X.shape))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def read_f64le(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    head = len(MAGIC) + _HEADER.size
    if len(raw) < head or raw[:len(MAGIC)] != MAGIC:
        raise VectorFileError(f"{path}: not an SJLT1 binary vector file")
    count, dim = _HEADER.unpack_from(raw, len(MAGIC))
    if len(raw) - head != 8 * count * dim:
        raise VectorFileError(f"{path}: payload holds {len(raw) - head} bytes, header says {8 * count * dim}")
    return np.frombuffer(raw, dtype="<f8", offset=head).astype(np.float64).reshape(count, dim)


def write_csv(path, X, header=True) -> None:
    X = _as_batch(X)
    with open(path, "w") as fh:
        if header:
            fh.write(f"#SJLT1,{X.shape[0]},{X.shape[1]}\n")
        for row in X:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def read_csv(path) -> np.ndarray:
    rows, declared = [], None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split(",")
                if lineno == 1 and len(parts) == 3 and parts[0] == "SJLT1":
                    declared = (int(parts[1]), int(parts[2]))
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as e:
                raise VectorFileError(f"{path}:{lineno}: {e}") from None
    if rows and len({len(r) for r in rows}) > 1:
        raise VectorFileError(f"{path}: rows have different lengths")
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(rows[0]) if rows else (declared or (0, 0))[1])
    if declared is not None and X.shape != declared:
        raise VectorFileError(f"{path}: header says {declared}, found {X.shape}")
    return X


def detect_format(path) -> str:
    with open(path, "rb") as fh:
        return "f64le" if fh.read(len(MAGIC)) == MAGIC else "csv"


def read_vectors(path, fmt=None) -> np.ndarray:
    fmt = fmt or detect_format(path)
    if fmt == "f64le":
        return read_f64le(path)
    if fmt == "csv":
        return read_csv(path)
    raise VectorFileError(f"unknown format {fmt!r}")


def write_vectors(path, X, fmt="f64le") -> None:
    if fmt == "f64le":
        write_f64le(path, X)
    elif fmt == "csv":
        write_csv(path, X)
    else:
        raise VectorFileError(f"unknown format {fmt!r}")
