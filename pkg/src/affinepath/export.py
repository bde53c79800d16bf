"""CSV writers. Numbers use 17 significant digits so they read back exactly."""

from __future__ import annotations

import numpy as np


def fmt(v):
    return f"{float(v):.17g}"


def write_header(fh, header):
    for line in header:
        fh.write(f"# {line}\n")


def write_paths(fh, paths, header=(), start=0):
    """Columns ``sample, t, X1..Xd, tau1..taum, event``; failed samples are listed as comments."""
    write_header(fh, header)
    first = next((p for p in paths if not isinstance(p, Exception)), None)
    if first is None:
        fh.write("sample,t,event\n")
    else:
        d, m = first.dim, first.tau.shape[1]
        cols = [f"X{k + 1}" for k in range(d)] + [f"tau{k + 1}" for k in range(m)]
        fh.write("sample,t," + ",".join(cols) + ",event\n")
    for i, p in enumerate(paths, start):
        if isinstance(p, Exception):
            fh.write(f"# sample {i} failed: {type(p).__name__}: {p}\n")
            continue
        for t, x, tau, ev in zip(p.output_grid, p.X, p.tau, p.events):
            row = [str(i), fmt(t)] + [fmt(v) for v in x] + [fmt(v) for v in tau] + [str(int(ev))]
            fh.write(",".join(row) + "\n")


def write_riccati(fh, solutions, header=()):
    """Columns ``u_index, t, Re phi, Im phi, Re psi1, Im psi1, ...``."""
    write_header(fh, header)
    d = solutions[0].psi.shape[1]
    cols = ["u_index", "t", "re_phi", "im_phi"]
    for k in range(d):
        cols += [f"re_psi{k + 1}", f"im_psi{k + 1}"]
    fh.write(",".join(cols) + "\n")
    for q, sol in enumerate(solutions):
        for t, phi, psi in zip(sol.time_grid, sol.phi, sol.psi):
            row = [str(q), fmt(t), fmt(phi.real), fmt(phi.imag)]
            for v in psi:
                row += [fmt(v.real), fmt(v.imag)]
            fh.write(",".join(row) + "\n")


def format_u(u):
    return " ".join(f"{complex(v).real:.17g}{complex(v).imag:+.17g}j" for v in np.asarray(u).reshape(-1))


def write_cf_report(fh, report, header=()):
    """Columns ``u, t, re_est, im_est, se, re_pred, im_pred, z, flagged``."""
    write_header(fh, header)
    fh.write("u,t,re_est,im_est,se,re_pred,im_pred,z,flagged\n")
    for p in report.points:
        row = [
            format_u(p.u0),
            fmt(p.t),
            fmt(p.estimate.real),
            fmt(p.estimate.imag),
            fmt(p.std_error),
            fmt(p.prediction.real),
            fmt(p.prediction.imag),
            fmt(p.z),
            str(int(p.flagged)),
        ]
        fh.write(",".join(row) + "\n")
    fh.write(f"# flagged {report.n_flagged} of {len(report.points)}; p-value {report.p_value:.6g}; ")
    fh.write("pass\n" if report.passed else "fail\n")
