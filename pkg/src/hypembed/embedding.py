"""Embedding container and its TSV format."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from . import numerics as nm
from .errors import InputError, ParseError


@dataclass
class Embedding:
    """Node labels mapped to Poincaré-ball points.

    Attributes
    ----------
    points : (n, r) array
        Doubles or software floats; every row has norm < 1.
    labels : list of str
    method : str
        Producer (``"combinatorial"``, ``"hmds"``, ``"sgd"``, ...).
    scale : float
        Hyperbolic distances approximate ``scale * d_true``. Metrics divide
        embedded distances by it.
    precision : int
        Mantissa bits of ``points``.
    meta : dict
        Free-form provenance (eps, tau, eigenvalues, ...).
    """

    points: np.ndarray
    labels: list
    method: str = "unknown"
    scale: float = 1.0
    precision: int = nm.DOUBLE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.points.ndim != 2:
            raise InputError(f"points must be an (n, r) array, got shape {self.points.shape}")
        if len(self.labels) != len(self.points):
            raise InputError("label count does not match point count")
        self.labels = [str(x) for x in self.labels]
        self.precision = nm.precision_of(self.points)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def distances(self):
        """Pairwise hyperbolic distances as doubles (unscaled)."""
        return geo.pairwise_dist_float(self.points)

    def reorder(self, labels):
        """Rows permuted to follow ``labels``; missing labels raise."""
        idx = self.index()
        missing = [lab for lab in labels if lab not in idx]
        if missing:
            raise InputError(f"embedding has no point for node {missing[0]!r}")
        order = [idx[lab] for lab in labels]
        return Embedding(self.points[order], list(labels), self.method, self.scale, self.precision, dict(self.meta))


def _digits(bits):
    return math.ceil(bits * math.log10(2)) + 2


def format_embedding(e):
    """TSV text: a ``#`` header with provenance, then ``label<TAB>c1...cr``."""
    digits = _digits(e.precision)
    head = f"# hypembed method={e.method} dim={e.dim} scale={e.scale!r} precision={e.precision}"
    lines = [head]
    soft = nm.is_soft(e.points)
    for lab, row in zip(e.labels, e.points):
        if soft:
            cells = [format(v, f".{digits}g") for v in row]
        else:
            cells = [repr(float(v)) for v in row]
        lines.append("\t".join([lab] + cells))
    return "\n".join(lines) + "\n"


def load_embedding(text, bits=None):
    """Parse :func:`format_embedding` output.

    ``bits`` overrides the precision recorded in the header.
    """
    header = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ParseError("expected a label and at least one coordinate", lineno)
        rows.append((lineno, parts))
    if not rows:
        raise ParseError("embedding file has no points")
    dim = len(rows[0][1]) - 1
    for lineno, parts in rows:
        if len(parts) - 1 != dim:
            raise ParseError(f"expected {dim} coordinates, got {len(parts) - 1}", lineno)
    if bits is None:
        bits = int(header.get("precision", nm.DOUBLE))
    labels = [p[0] for _, p in rows]
    try:
        if bits == nm.DOUBLE:
            pts = np.array([[float(c) for c in p[1:]] for _, p in rows])
        else:
            pts = nm.asarray([[c.strip() for c in p[1:]] for _, p in rows], bits)
    except ValueError as exc:
        raise ParseError(f"bad coordinate: {exc}") from None
    with nm.working_precision(bits):
        geo.check_in_ball(pts)
    scale = float(header.get("scale", 1.0))
    return Embedding(pts, labels, header.get("method", "unknown"), scale, bits)
