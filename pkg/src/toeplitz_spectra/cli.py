"""Command-line front end.

Each subcommand reads a model file, runs one analysis and writes a CSV or
JSON artifact.  Exit status: 0 on success, 1 for invalid input, 2 for a
numerical failure and 3 when ``widom-check`` finds a disagreement.

A job file (``toeplitz-spectra job spec.json``) holds the same options as
JSON keys: ``model``, ``command``, ``window``, ``resolution``, ``s``, ``N``,
``seed``, ``cases``, ``energy``, ``method``, ``output``, ``format``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SpectralError, ValidationError
from .model import BlockSymbol, load_model

COMMANDS = ("sigma", "lambda", "gamma", "finite", "widom-check", "chiral", "brillouin",
            "quasimode", "hypotheses")
EXIT_WIDOM_FAIL = 3


@dataclass
class JobSpec:
    command: str
    model: Optional[str] = None
    window: tuple = (-3.0, 3.0, -3.0, 3.0)
    resolution: float = 0.01
    s: float = 1.0
    N: int = 100
    seed: int = 0
    cases: int = 100
    energy: Optional[complex] = None
    method: str = "dense"
    output: Optional[str] = None
    format: str = "csv"
    threads: Optional[int] = None
    base_dir: Path = field(default_factory=Path.cwd)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        x0, x1, y0, y1 = self.window
        if not (x0 < x1 and y0 < y1):
            raise ValidationError(f"empty window {self.window}")
        if not self.resolution > 0:
            raise ValidationError("resolution must be positive")
        if not self.s > 0:
            raise ValidationError("scale must be positive")
        if self.N < 1:
            raise ValidationError("N must be at least 1")
        if self.format not in ("csv", "json"):
            raise ValidationError(f"unknown format {self.format!r}")
        if self.command != "widom-check" and not self.model:
            raise ValidationError(f"{self.command} needs a model")


# -- model lookup and output -----------------------------------------------------

def fixture_path(kind: str, name: str) -> Path:
    """Path of a packaged fixture, e.g. ``fixture_path("models", "ssh_chiral")``."""
    return Path(str(resources.files("toeplitz_spectra") / "fixtures" / kind / f"{name}.json"))


def resolve_model(ref: str, base: Path) -> BlockSymbol:
    """Load a model from a path (relative to ``base``) or a packaged fixture name."""
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        fx = fixture_path("models", Path(ref).stem)
        if fx.exists():
            p = fx
    return load_model(p)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(float(x.real)), _jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class Artifact:
    header: list
    rows: list
    doc: dict


def _points_artifact(E, extra_names=(), extra_cols=()):
    E = np.asarray(E, dtype=complex).ravel()
    rows = [[e.real, e.imag, *(c[i] for c in extra_cols)] for i, e in enumerate(E)]
    header = ["re", "im", *extra_names]
    return Artifact(header, rows, {"columns": header, "rows": rows})


# -- commands --------------------------------------------------------------------

def _cmd_sigma(H, job):
    from .spectra import sigma_samples

    ss = sigma_samples(H, job.s, K=max(16, int(job.N)))
    k = np.repeat(ss.k, H.L)
    band = np.tile(np.arange(H.L), ss.k.size)
    return _points_artifact(ss.points, ("k", "band"), (k, band))


def _cmd_lambda(H, job):
    from .spectra import lambda_scan

    lc = lambda_scan(H, job.window, job.resolution, threads=job.threads)
    fE = np.array([f.E for f in lc.f_points], dtype=complex)
    fr = np.array([f.residual for f in lc.f_points])
    E = np.concatenate([lc.points, fE])
    kind = ["lambda"] * lc.points.size + ["f"] * fE.size
    val = np.concatenate([lc.gaps, fr])
    art = _points_artifact(E, ("kind", "value"), (kind, val))
    art.doc["f_status"] = lc.f_status
    return art


def _gamma(H, job):
    from .spectra import gamma_find, lambda_scan

    lc = lambda_scan(H, job.window, job.resolution, threads=job.threads)
    return lc, gamma_find(H, job.window, lc, threads=job.threads)


def _cmd_gamma(H, job):
    _, out = _gamma(H, job)
    cols = ("multiplicity", "side", "residual", "dim_right", "dim_left")
    vals = ([o.multiplicity for o in out], [o.side for o in out], [o.residual for o in out],
            [o.dims[0] for o in out], [o.dims[1] for o in out])
    return _points_artifact([o.E for o in out], cols, vals)


def _cmd_finite(H, job):
    from .spectra import finite_spectrum
    from .spectra.finite import VECTOR_CAP

    vectors = job.method == "dense" and job.N * H.L <= VECTOR_CAP
    fs = finite_spectrum(H, job.N, job.s, want_vectors=vectors, method=job.method)
    if vectors:
        art = _points_artifact(fs.eigenvalues, ("left_mass", "participation"),
                               (fs.left_mass, fs.participation))
    else:
        art = _points_artifact(fs.eigenvalues)
    art.doc.update(N=fs.N, s=fs.s, method=job.method)
    return art


def _cmd_brillouin(H, job):
    from .spectra import brillouin, lambda_scan

    lc = lambda_scan(H, job.window, job.resolution, threads=job.threads)
    z = brillouin(H, lc.points)
    return _points_artifact(lc.points, ("zL_re", "zL_im", "zL1_re", "zL1_im"),
                            (z[:, 0].real, z[:, 0].imag, z[:, 1].real, z[:, 1].imag))


def _cmd_chiral(H, job):
    from .spectra import chiral_windings, zero_mode_certificate

    cert = zero_mode_certificate(H)
    doc = {"certificate": None}
    header = ["s", "W_plus", "W_minus", "interval_lo", "interval_hi"]
    rows = []
    if cert is not None:
        doc["certificate"] = {"s": cert.s, "W_plus": cert.W_plus, "W_minus": cert.W_minus,
                              "interval": list(cert.interval),
                              "breakpoints": list(cert.breakpoints)}
        rows.append([cert.s, cert.W_plus, cert.W_minus, *cert.interval])
    if job.s != 1.0:
        wp, wm = chiral_windings(H, job.s)
        doc["at_scale"] = {"s": job.s, "W_plus": wp, "W_minus": wm}
    doc.update(columns=header, rows=rows)
    return Artifact(header, rows, doc)


def _cmd_quasimode(H, job):
    from .spectra import lambda_scan, quasimode

    if job.energy is not None:
        energies = [complex(job.energy)]
    else:
        lc = lambda_scan(H, job.window, job.resolution, with_f=False, threads=job.threads)
        pts = lc.points
        if pts.size == 0:
            raise ValidationError("no Λ points in the window")
        energies = pts[np.linspace(0, pts.size - 1, min(10, pts.size)).round().astype(int)]
    rows = []
    for E in energies:
        qm = quasimode(H, E, job.N)
        rows.append([E.real, E.imag, job.N, qm.residual, qm.constant, qm.s])
    header = ["re", "im", "N", "residual", "constant", "s"]
    return Artifact(header, rows, {"columns": header, "rows": rows})


def _cmd_hypotheses(H, job):
    from .spectra import hypothesis_report

    rep = hypothesis_report(H, job.window, job.resolution, threads=job.threads)
    d = rep.to_dict()
    keys = sorted(k for k in d if k != "notes")
    rows = [[k, _fmt(d[k])] for k in keys]
    return Artifact(["key", "value"], rows, d)


def _cmd_widom(job, out_err):
    from .widom import widom_crosscheck

    res = widom_crosscheck(job.seed, job.cases)
    header = ["case", "L", "N", "E_re", "E_im", "discrepancy", "passed"]
    rows = [[c.case, c.L, c.N, c.E.real, c.E.imag, c.discrepancy, c.passed] for c in res]
    failed = [c for c in res if not c.passed]
    for c in failed:
        out_err.write(f"widom-check failure: seed={job.seed} case={c.case} L={c.L} N={c.N} "
                      f"E={c.E!r} discrepancy={c.discrepancy:.3e}\n")
    doc = {"seed": job.seed, "cases": job.cases, "failed": len(failed),
           "columns": header, "rows": rows}
    return Artifact(header, rows, doc), (EXIT_WIDOM_FAIL if failed else 0)


_HANDLERS = {"sigma": _cmd_sigma, "lambda": _cmd_lambda, "gamma": _cmd_gamma,
             "finite": _cmd_finite, "brillouin": _cmd_brillouin, "chiral": _cmd_chiral,
             "quasimode": _cmd_quasimode, "hypotheses": _cmd_hypotheses}


def run(job: JobSpec, out=None, err=None) -> int:
    """Execute a job and write its artifact; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        job.validate()
        status = 0
        if job.command == "widom-check":
            art, status = _cmd_widom(job, err)
        else:
            H = resolve_model(job.model, job.base_dir)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                art = _HANDLERS[job.command](H, job)
            msgs = sorted({str(w.message) for w in caught})
            for m in msgs:
                err.write(f"warning: {m}\n")
            if msgs:
                art.doc["warnings"] = msgs
        text = to_json(art.doc) if job.format == "json" else to_csv(art.header, art.rows)
        if job.output:
            p = Path(job.output)
            if not p.is_absolute():
                p = job.base_dir / p
            p.parent.mkdir(parents=True, exist_ok=True)
            with open(p, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            out.write(text)
        return status
    except SpectralError as exc:
        _report_error(err, exc.code, str(exc), exc.context)
        return exc.exit_status
    except ValueError as exc:
        _report_error(err, "validation_error", str(exc), {})
        return 1


def _report_error(err, code, message, context):
    err.write(to_json({"error": code, "message": message, "context": context}))


# -- argument parsing ------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are input errors: exit 1, not 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--model", help="model JSON file or packaged fixture name")
    p.add_argument("--window", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    p.add_argument("--res", type=float, help="grid resolution")
    p.add_argument("--scale", type=float, help="scaling parameter s")
    p.add_argument("--n", type=int, help="number of blocks N (sigma: k-points)")
    p.add_argument("--seed", type=int)
    p.add_argument("--cases", type=int, help="widom-check instance count")
    p.add_argument("--energy", type=float, nargs=2, metavar=("RE", "IM"))
    p.add_argument("--method", choices=("dense", "multiscale"))
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--threads", type=int, help="worker threads for grid scans")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="toeplitz-spectra", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for c in COMMANDS:
        _add_common(sub.add_parser(c))
    j = sub.add_parser("job", help="run a JSON job file")
    j.add_argument("file")
    j.add_argument("--out")
    j.add_argument("--threads", type=int)
    return ap


def job_from_dict(d: dict, base_dir: Path) -> JobSpec:
    d = dict(d)
    if "energy" in d and d["energy"] is not None:
        e = d["energy"]
        d["energy"] = complex(e[0], e[1]) if isinstance(e, (list, tuple)) else complex(e)
    if "window" in d:
        d["window"] = tuple(float(v) for v in d["window"])
    unknown = set(d) - set(JobSpec.__dataclass_fields__) - {"description"}
    if unknown:
        raise ValidationError(f"unknown job keys {sorted(unknown)}")
    d.pop("description", None)
    return JobSpec(base_dir=base_dir, **d)


def _load_job(path: str) -> JobSpec:
    p = Path(path)
    if not p.exists():
        fx = fixture_path("jobs", p.stem)
        if fx.exists():
            p = fx
    try:
        d = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read job file {path}: {exc}") from None
    return job_from_dict(d, p.parent)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "job":
        try:
            job = _load_job(args.file)
        except SpectralError as exc:
            _report_error(sys.stderr, exc.code, str(exc), exc.context)
            return exc.exit_status
        except (TypeError, ValueError) as exc:
            _report_error(sys.stderr, "validation_error", str(exc), {})
            return 1
        if args.out:
            job.output = str(Path(args.out).resolve())
        if args.threads is not None:
            job.threads = args.threads
        return run(job)
    job = JobSpec(command=args.command, model=args.model)
    for attr, val in (("window", args.window), ("resolution", args.res), ("s", args.scale),
                      ("N", args.n), ("seed", args.seed), ("cases", args.cases),
                      ("method", args.method), ("output", args.out), ("format", args.format),
                      ("threads", args.threads)):
        if val is not None:
            setattr(job, attr, tuple(val) if attr == "window" else val)
    if args.energy is not None:
        job.energy = complex(*args.energy)
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
