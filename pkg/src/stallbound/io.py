"""Reading and writing configs, catalogs, control points and result tables.

Run configs and control-point documents are JSON. Tables are CSV with a
leading ``#`` provenance line (tool version, seed, config hash) followed by a
header row. Floats are written with ``repr`` so every value round-trips
exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import fields

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .model import (AuxVars, BandwidthWeights, CachePlacement, ControlPoint,
                    ScheduleMatrices, SystemTopology, VideoCatalog)
from .workload import WorkloadSpec


class ParseError(ConfigurationError):
    """A document could not be parsed; the message names file and location."""


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def provenance_line(seed=None, config_hash=None):
    parts = [f"# stallbound {__version__}"]
    if seed is not None:
        parts.append(f"seed={seed}")
    if config_hash is not None:
        parts.append(f"config_sha256={config_hash}")
    return " ".join(parts)


def write_csv(path, header, rows, provenance):
    with open(path, "w", newline="") as fh:
        fh.write(provenance + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def read_csv(path):
    """Return ``(comment_lines, header, rows)``; rows keep their file line numbers."""
    comments, header, rows = [], None, []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
                continue
            if not line.strip():
                continue
            values = next(csv.reader([line]))
            if header is None:
                header = values
            else:
                if len(values) != len(header):
                    raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, "
                                     f"got {len(values)}")
                rows.append((lineno, values))
    if header is None:
        raise ParseError(f"{path}:1: missing header row")
    return comments, header, rows


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def file_sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---------------------------------------------------------------------------
# catalog


def write_catalog(catalog: VideoCatalog, path, provenance):
    with open(path, "w", newline="") as fh:
        fh.write(provenance + "\n")
        fh.write(f"# catalog tau={fmt(catalog.tau)} d_s={fmt(catalog.d_s)} "
                 f"sigma={fmt(catalog.sigma)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file_id", "L_i", "lambda_i", "weight_i"])
        for i in range(catalog.r):
            w.writerow([i, int(catalog.L[i]), fmt(catalog.lam[i]), fmt(catalog.weight[i])])


def read_catalog(path, overrides=None):
    comments, header, rows = read_csv(path)
    expected = ["file_id", "L_i", "lambda_i", "weight_i"]
    if header != expected:
        raise ParseError(f"{path}: header must be {','.join(expected)}")
    globals_ = {}
    for line in comments:
        if line.startswith("# catalog"):
            for token in line.split()[2:]:
                key, _, value = token.partition("=")
                globals_[key] = float(value)
    globals_.update(overrides or {})
    if "tau" not in globals_:
        raise ParseError(f"{path}: missing '# catalog tau=...' line")
    L, lam, weight = [], [], []
    for expect_id, (lineno, values) in enumerate(rows):
        try:
            fid = int(values[0])
            L.append(int(values[1]))
            lam.append(float(values[2]))
            weight.append(float(values[3]))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if fid != expect_id:
            raise ParseError(f"{path}:{lineno}: file_id {fid} out of order")
    try:
        return VideoCatalog(L=L, lam=lam, weight=weight, tau=globals_["tau"],
                            d_s=globals_.get("d_s", 0.0), sigma=globals_.get("sigma", 0.0))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# topology and workload specs


def topology_from_dict(doc, where="topology"):
    names = [f.name for f in fields(SystemTopology)]
    missing = [n for n in names if n not in doc]
    if missing:
        raise ParseError(f"{where}: missing keys {missing}")
    try:
        return SystemTopology(**{n: doc[n] for n in names})
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def topology_to_dict(topology):
    return {f.name: getattr(topology, f.name).tolist() for f in fields(SystemTopology)}


def workload_from_dict(doc, where="workload"):
    allowed = {f.name for f in fields(WorkloadSpec)}
    unknown = set(doc) - allowed
    if unknown:
        raise ParseError(f"{where}: unknown keys {sorted(unknown)}")
    doc = dict(doc)
    if "lambda_rule" in doc:
        doc["lambda_rule"] = tuple(tuple(piece) for piece in doc["lambda_rule"])
    if doc.get("weights") is not None:
        doc["weights"] = tuple(doc["weights"])
    try:
        return WorkloadSpec(**doc)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{where}: {exc}") from None


# ---------------------------------------------------------------------------
# control points


def point_to_dict(point: ControlPoint, provenance=None):
    """Sparse document: every nonzero entry with its explicit index tuple."""

    def entries(arr):
        arr = np.asarray(arr)
        return [[*map(int, idx), float(arr[idx])] for idx in zip(*np.nonzero(arr))]

    pi = point.schedule.pi
    doc = {
        "shape": {"r": int(pi.shape[0]), "m": int(pi.shape[1]),
                  "dmax": int(point.schedule.q.shape[2]),
                  "emax": int(point.schedule.p.shape[2])},
        "pi": entries(pi),
        "p": entries(point.schedule.p),
        "q": entries(point.schedule.q),
        "w": {"d": entries(point.bandwidth.w_d), "dbar": entries(point.bandwidth.w_dbar),
              "e": entries(point.bandwidth.w_e)},
        "placement": {"capacity": point.placement.capacity.tolist(),
                      "counts": [[j, i, int(c)] for j, i, c in
                                 ((int(a), int(b), point.placement.counts[a, b])
                                  for a, b in zip(*np.nonzero(point.placement.counts)))]},
        "t": [[i, float(v)] for i, v in enumerate(point.aux.t)],
    }
    if provenance:
        doc["provenance"] = provenance
    return doc


def point_from_dict(doc, where="control point"):
    try:
        shape = doc["shape"]
        r, m, D, E = shape["r"], shape["m"], shape["dmax"], shape["emax"]

        def dense(items, dims):
            out = np.zeros(dims)
            for item in items:
                *idx, value = item
                if len(idx) != len(dims):
                    raise ParseError(f"{where}: entry {item} needs {len(dims)} indices")
                out[tuple(int(k) for k in idx)] = value
            return out

        counts = dense(doc["placement"]["counts"], (m, r)).astype(int)
        t = dense(doc["t"], (r,))
        return ControlPoint(
            schedule=ScheduleMatrices(dense(doc["pi"], (r, m)), dense(doc["p"], (r, m, E)),
                                      dense(doc["q"], (r, m, D))),
            bandwidth=BandwidthWeights(dense(doc["w"]["d"], (m, D)),
                                       dense(doc["w"]["dbar"], (m, D)),
                                       dense(doc["w"]["e"], (m, E))),
            placement=CachePlacement(counts, doc["placement"]["capacity"]),
            aux=AuxVars(t),
        )
    except KeyError as exc:
        raise ParseError(f"{where}: missing key {exc}") from None
    except (IndexError, ValueError, TypeError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def resolve(base_dir, path):
    return path if os.path.isabs(path) else os.path.join(base_dir, path)
