"""Deterministic output writers.

Every artifact embeds the fully resolved run configuration and a format
version, and identical resolved configurations must produce byte-identical
files: JSON is dumped with sorted keys, CSV floats use ``repr`` (shortest
round-trip), and no timestamps or host details are written.

CSV files carry the version and config as ``#``-prefixed preamble lines.
"""

import json
import sys

FORMAT_VERSION = "bflab/1"


def payload(kind, config, body):
    out = {"format_version": FORMAT_VERSION, "kind": kind, "config": config}
    out.update(body)
    return out


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def write_json(obj, path=None):
    fh, close = _open_out(path)
    try:
        fh.write(_dumps(obj))
        fh.write("\n")
    finally:
        if close:
            fh.close()


def write_ndjson(records, path=None):
    fh, close = _open_out(path)
    try:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, allow_nan=True))
            fh.write("\n")
    finally:
        if close:
            fh.close()


def _cell(v):
    if isinstance(v, float):          # includes numpy float64, whose own repr
        return repr(float(v))         # is not a bare literal
    return str(v)


def write_csv(header, rows, path=None, kind=None, config=None):
    fh, close = _open_out(path)
    try:
        fh.write(f"# format_version: {FORMAT_VERSION}\n")
        if kind is not None:
            fh.write(f"# kind: {kind}\n")
        if config is not None:
            fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    finally:
        if close:
            fh.close()
