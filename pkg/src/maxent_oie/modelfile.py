"""JSON model files: save a fit, load it back as a density or a full fit.

Floats are written with ``repr`` (shortest round-trip form), so a loaded
model reproduces every stored value bit-for-bit. Everything except the
``metadata`` block is a deterministic function of the data and flags.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from .core import AffineMap, Dataset, MomentBasis, sample_moments
from .density import MaxEntDensity
from .quadrature import build_grid
from .selection import DegreeSweepResult
from .solver import MaxEntFit, SolverConfig
from .support import SupportRegion

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    pass


def _finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


def fit_to_dict(fit: MaxEntFit, data: Dataset, sweep: Optional[DegreeSweepResult] = None) -> Dict[str, Any]:
    basis = fit.basis
    doc: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "basis": basis.to_dict(),
        "support": fit.support.to_dict(),
        "scaling": {"shift": list(basis.scaling.shift), "scale": list(basis.scaling.scale)},
        "layout": {"response_column": basis.dim - 1},
        "lambda_hat": [float(v) for v in fit.lambda_hat],
        "log_partition": fit.log_partition_at_opt,
        "h_min": fit.h_min,
        "log_likelihood": fit.log_likelihood,
        "grid": {"nodes_per_dim": fit.grid.nodes_per_dim, "n_nodes": fit.grid.size},
        "solver": {
            "converged": fit.converged,
            "iterations": fit.iterations,
            "grad_norm_final": fit.grad_norm_final,
            "grad_tol": fit.config.grad_tol,
            "max_iters": fit.config.max_iters,
            "ridge_floor": fit.config.ridge_floor,
        },
        "data": data.fingerprint(),
    }
    if sweep is not None:
        doc["selection"] = {
            "selected_degree": sweep.selected_degree,
            "results": [
                {
                    "degree": r.degree,
                    "converged": r.converged,
                    "log_likelihood": _finite_or_none(r.log_likelihood),
                    "evidence": _finite_or_none(r.evidence),
                    "error": r.error,
                }
                for r in sweep.results
            ],
        }
    return doc


def save_model(path: str, fit: MaxEntFit, data: Dataset, sweep: Optional[DegreeSweepResult] = None) -> Dict[str, Any]:
    """Write the model atomically (temp file then rename) and return the document."""
    doc = fit_to_dict(fit, data, sweep)
    doc["metadata"] = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".model-", suffix=".json", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return doc


@dataclass(frozen=True, eq=False)
class LoadedModel:
    doc: Dict[str, Any]
    basis: MomentBasis
    support: SupportRegion
    density: MaxEntDensity

    @property
    def fingerprint(self) -> Dict[str, Any]:
        return self.doc["data"]

    @property
    def converged(self) -> bool:
        return bool(self.doc["solver"]["converged"])

    def restore_fit(self, data: Dataset) -> MaxEntFit:
        """Rebuild the grid and sample moments on ``data`` around the stored parameters."""
        check_fingerprint(self, data)
        grid = build_grid(self.support, self.basis, self.doc["grid"]["nodes_per_dim"])
        moments = sample_moments(data, self.basis)
        lam = np.asarray(self.doc["lambda_hat"], dtype=float)
        lam.setflags(write=False)
        log_z = float(self.doc["log_partition"])
        solver = self.doc["solver"]
        config = SolverConfig(
            grad_tol=solver["grad_tol"], max_iters=solver["max_iters"], ridge_floor=solver["ridge_floor"]
        )
        return MaxEntFit(
            lambda_hat=lam,
            log_partition_at_opt=log_z,
            dual_value=float(lam @ moments.values) - log_z,
            iterations=solver["iterations"],
            grad_norm_final=solver["grad_norm_final"],
            converged=solver["converged"],
            moments=moments,
            grid=grid,
            config=config,
        )


def load_model(path: str) -> LoadedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    return model_from_dict(doc)


def model_from_dict(doc: Dict[str, Any]) -> LoadedModel:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFileError(f"unsupported model schema version {doc.get('schema_version')!r}")
    try:
        support = SupportRegion.from_dict(doc["support"])
        scaling = AffineMap(tuple(doc["scaling"]["shift"]), tuple(doc["scaling"]["scale"]))
        b = doc["basis"]
        basis = MomentBasis.monomial(b["dim"], b["max_degree"], scaling)
        if [list(a) for a in basis.indices] != b["indices"]:
            raise ModelFileError("stored basis indices do not match the graded-lex enumeration")
        lam = np.asarray(doc["lambda_hat"], dtype=float)
        if lam.shape != (basis.size,):
            raise ModelFileError("lambda_hat length does not match the basis")
        density = MaxEntDensity(basis, support, lam, float(doc["log_partition"]))
    except KeyError as exc:
        raise ModelFileError(f"model file is missing field {exc}") from exc
    return LoadedModel(doc, basis, support, density)


def check_fingerprint(model: LoadedModel, data: Dataset) -> None:
    stored = model.fingerprint
    actual = data.fingerprint()
    if stored != actual:
        raise ModelFileError(
            f"data fingerprint mismatch: model was fitted on {stored['n_rows']}x{stored['n_cols']} "
            f"rows (sha256 {stored['sha256'][:12]}...), got {actual['n_rows']}x{actual['n_cols']} "
            f"(sha256 {actual['sha256'][:12]}...)"
        )
