"""JSON schemas for core objects and the CSV sample format.

Documents and implements the wire formats: domains carry "individuals",
distributions "weights", functions "values", classes a tagged "repr" object.
Samples are CSV files with header ``x_index,outcome``.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .core import (Distribution, Domain, ExplicitClass, Fn, FnClass,
                   FullCubeClass, GridCubeClass, ParityClass, Sample,
                   SupportBoundedClass)


def domain_to_json(domain: Domain) -> dict:
    return {"individuals": list(domain.individuals)}


def domain_from_json(doc: dict) -> Domain:
    labels = [tuple(x) if isinstance(x, list) else x for x in doc["individuals"]]
    return Domain(tuple(labels))


def distribution_to_json(mu: Distribution) -> dict:
    return {"domain": domain_to_json(mu.domain), "weights": list(map(float, mu.weights))}


def distribution_from_json(doc: dict) -> Distribution:
    return Distribution(domain_from_json(doc["domain"]), np.array(doc["weights"]))


def fn_to_json(f: Fn) -> dict:
    return {
        "domain": domain_to_json(f.domain),
        "values": list(map(float, f.values)),
        "kind": f.kind,
        "bound": float(f.bound),
    }


def fn_from_json(doc: dict) -> Fn:
    return Fn(domain_from_json(doc["domain"]), np.array(doc["values"]),
              doc.get("kind", "generic"), doc.get("bound"))


def fnclass_to_json(cls: FnClass) -> dict:
    base = {"domain": domain_to_json(cls.domain), "kind": cls.kind}
    if isinstance(cls, ExplicitClass):
        rep = {"type": "explicit",
               "members": [list(map(float, f.values)) for f in cls.members]}
    elif isinstance(cls, FullCubeClass):
        rep = {"type": "full_cube", "lo": cls.lo, "hi": cls.hi}
    elif isinstance(cls, GridCubeClass):
        rep = {"type": "grid", "lo": cls.lo, "hi": cls.hi, "step": cls.step}
    elif isinstance(cls, SupportBoundedClass):
        rep = {"type": "support_bounded", "special": list(cls.special),
               "free": list(cls.free), "budget": cls.budget}
    elif isinstance(cls, ParityClass):
        rep = {"type": "parity", "m": cls.m, "include_bot": cls.include_bot}
    else:
        raise ValueError(f"cannot serialize {type(cls).__name__}")
    base["repr"] = rep
    return base


def fnclass_from_json(doc: dict) -> FnClass:
    domain = domain_from_json(doc["domain"])
    kind = doc.get("kind", "generic")
    rep = doc["repr"]
    t = rep["type"]
    if t == "explicit":
        members = tuple(Fn(domain, np.array(v), kind,
                           None if kind != "generic" else max(1.0, float(np.abs(v).max())))
                        for v in rep["members"])
        return ExplicitClass(domain, kind, members)
    if t == "full_cube":
        return FullCubeClass(domain, kind, lo=rep["lo"], hi=rep["hi"])
    if t == "grid":
        return GridCubeClass(domain, kind, lo=rep["lo"], hi=rep["hi"], step=rep["step"])
    if t == "support_bounded":
        return SupportBoundedClass(domain, kind, special=tuple(rep["special"]),
                                   free=tuple(rep["free"]), budget=rep["budget"])
    if t == "parity":
        return ParityClass(domain, kind, m=rep["m"], include_bot=rep["include_bot"])
    raise ValueError(f"unknown class repr type {t!r}")


def sample_to_csv(sample: Sample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x_index", "outcome"])
    for i, o in zip(sample.indices, sample.outcomes):
        writer.writerow([int(i), int(o)])
    return buf.getvalue()


def sample_from_csv(text: str, domain: Domain) -> Sample:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["x_index", "outcome"]:
        raise ValueError("sample CSV must start with header x_index,outcome")
    rows = [(int(a), int(b)) for a, b in reader]
    idx = np.array([r[0] for r in rows], dtype=np.int64)
    out = np.array([r[1] for r in rows], dtype=np.int64)
    return Sample(domain, idx, out)


def dump_json(doc, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)
