"""Acceptance criteria, one test each, every test printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``.
"""

import csv
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from emla_sens import cli
from emla_sens.actuator import Actuator, EMLAParams, PMSMParams, em_torque, steady_state_electrical
from emla_sens.config import example_config_path
from emla_sens.dynamics import rnea
from emla_sens.kinematics import KinematicRun, get_jacobian, run_trajectory, task_jacobian
from emla_sens.metrics import evaluate_metrics, metrics_for_run, sensitivity_pd
from emla_sens.robot import tcp_position, update_payload
from emla_sens.trajectory import TrajectorySpec, sample_times
from models import G, prismatic_1dof


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


# --- 1. Jacobian oracle ---------------------------------------------------------

def test_criterion_1_jacobian_oracle(shipped, capsys):
    m = shipped.model
    rng = np.random.default_rng(1)
    lo = np.array([j.limits[0] for j in m.joints])
    hi = np.array([j.limits[1] for j in m.joints])
    eps_q, eps_t = 1e-6, 1e-5
    worst_j = worst_jd = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        q = rng.uniform(lo, hi)
        qd = rng.normal(scale=0.5, size=3)
        pair = get_jacobian(m, q, qd)
        for i in range(3):
            e = np.zeros(3)
            e[i] = eps_q
            fd = (tcp_position(m, q + e) - tcp_position(m, q - e)) / (2 * eps_q)
            worst_j = max(worst_j, np.linalg.norm(pair.J[:, i] - fd) / np.linalg.norm(fd))
        fd_dot = (task_jacobian(m, q + qd * eps_t) - task_jacobian(m, q - qd * eps_t)) / (2 * eps_t)
        worst_jd = max(worst_jd, np.linalg.norm(fd_dot - pair.Jdot) / (1 + np.linalg.norm(pair.Jdot)))
    elapsed = time.perf_counter() - t0
    ok = worst_j <= 1e-6 and worst_jd <= 1e-4 and elapsed < 10.0
    verdict(capsys, 1, ok, f"max rel J error {worst_j:.2e} (<=1e-6), max Jdot error {worst_jd:.2e} (<=1e-4), "
                           f"{elapsed:.2f} s (<10 s)")


# --- 2. RNEA power balance --------------------------------------------------------

def _exp_batch(screw, theta):
    """Homogeneous 4x4 exponentials of one screw for a batch of (possibly complex) angles."""
    w, v = screw[:3], screw[3:]
    N = theta.shape[0]
    H = np.zeros((N, 4, 4), dtype=complex)
    H[:, 3, 3] = 1.0
    if not np.any(w):
        H[:, :3, :3] = np.eye(3)
        H[:, :3, 3] = theta[:, None] * v
        return H
    W = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    s, c = np.sin(theta)[:, None, None], np.cos(theta)[:, None, None]
    H[:, :3, :3] = np.eye(3) + s * W + (1 - c) * (W @ W)
    V = theta[:, None, None] * np.eye(3) + (1 - c) * W + (theta[:, None, None] - s) * (W @ W)
    H[:, :3, 3] = V @ v
    return H


def _link_frames(model, q):
    G_ = np.broadcast_to(np.eye(4, dtype=complex), (q.shape[0], 4, 4))
    out = []
    for i, (joint, parent) in enumerate(zip(model.joints, model.parent_transforms)):
        G_ = G_ @ parent.matrix() @ _exp_batch(joint.screw, q[:, i])
        out.append(G_)
    return out


def _energies(model, q, qd):
    """Kinetic and potential energy per sample; link velocities by complex-step differentiation of FK."""
    h = 1e-20
    frames = _link_frames(model, q + 1j * h * qd)
    KE = np.zeros(q.shape[0])
    PE = np.zeros(q.shape[0])
    for Gc, body in zip(frames, model.effective_inertias()):
        R, p = Gc[:, :3, :3].real, Gc[:, :3, 3].real
        dR, dp = Gc[:, :3, :3].imag / h, Gc[:, :3, 3].imag / h
        Wb = np.einsum("nji,njk->nik", R, dR)
        w = np.stack([Wb[:, 2, 1], Wb[:, 0, 2], Wb[:, 1, 0]], axis=1)
        v = np.einsum("nji,nj->ni", R, dp)
        m, c, I = body.mass, body.center_of_mass, body.rotational_inertia
        KE += 0.5 * m * np.einsum("ni,ni->n", v, v) + m * np.einsum("ni,ni->n", v, np.cross(w, c)) \
            + 0.5 * np.einsum("ni,ij,nj->n", w, I, w)
        PE -= m * (np.einsum("nij,j->ni", R, c) + p) @ model.gravity
    return KE, PE


def _energy_rates(model, q, qd, qdd, h=1e-3):
    rates = []
    for s in (h, -h, 2 * h, -2 * h):
        rates.append(_energies(model, q + qd * s + 0.5 * qdd * s * s, qd + qdd * s))
    (k1p, p1p), (k1m, p1m), (k2p, p2p), (k2m, p2m) = rates
    dk = (8 * (k1p - k1m) - (k2p - k2m)) / (12 * h)
    dp = (8 * (p1p - p1m) - (p2p - p2m)) / (12 * h)
    return dk, dp


def test_criterion_2_power_balance(shipped, spiral_run, capsys):
    model = update_payload(shipped.model, 100.0)
    run = spiral_run
    _, st = rnea(model, run.q, run.qdot, run.qddot)
    P = st.f_x * st.v_x
    dk, dp = _energy_rates(model, run.q, run.qdot, run.qddot)
    resid = np.abs(P.sum(axis=1) - dk - dp)
    tol = 1e-6 * np.maximum(1.0, np.abs(P).sum(axis=1))
    frac = float(np.mean(resid <= tol))
    ok = frac >= 0.999
    verdict(capsys, 2, ok, f"balance holds at {100 * frac:.3f}% of {len(resid)} steps (>=99.9%), "
                           f"max residual/tol {np.max(resid / tol):.2e}")


# --- 3. 1-DoF analytic sensitivity ------------------------------------------------

def test_criterion_3_vertical_sensitivity(capsys):
    m_link = 10.0
    model = prismatic_1dof(m_link, tcp=(0.0, 0.0, 0.25))
    act = [Actuator("slide", EMLAParams(lead=0.01), PMSMParams(R_s=0.1, L_d=1e-3, L_q=1e-3, n_p=4, psi_pm=0.1))]
    dt = 1e-3
    worst_d = worst_f = 0.0

    # tracked vertical motion with a hold: xddot = 0, so the derivative is g
    traj = TrajectorySpec(kind="linear", center=tcp_position(model, [0.0]), velocity=[0, 0, 0.2], M=2.0, hold=0.5)
    kin = run_trajectory(model, traj, dt, [0.0])
    runs = [kin]
    # prescribed motion with arbitrary xddot(t)
    t = np.arange(4001) * dt
    qdd = 1.5 * np.sin(2.0 * t) - 0.7 * np.cos(5.0 * t)
    qd = np.cumsum(qdd) * dt
    q = np.cumsum(qd) * dt
    z = np.column_stack([np.zeros_like(t), np.zeros_like(t), q])
    runs.append(KinematicRun(t, q[:, None], qd[:, None], qdd[:, None], z, z, dt, 0))

    for run in runs:
        fn = metrics_for_run(model, run, act)
        for m_tcp in (0.0, 37.5, 200.0):
            e = sensitivity_pd(fn, m_tcp, 1e-4, "central")
            a = run.qddot[:, 0]
            worst_d = max(worst_d, float(np.max(np.abs(e.derivatives["psi2"][:, 0] - (G + a)))))
            closed = (m_link + m_tcp) * (G + a)
            worst_f = max(worst_f, float(np.max(np.abs(e.series.psi2[:, 0] - closed) / np.maximum(1, closed))))
    ok = worst_d <= 1e-6 and worst_f <= 1e-12
    verdict(capsys, 3, ok, f"max |dpsi2/dm - (g + xddot)| = {worst_d:.2e} N/kg (<=1e-6), "
                           f"force vs (m_link + m_TCP)(g + xddot) rel {worst_f:.1e}")


# --- 4. Tracking and convergence --------------------------------------------------

def test_criterion_4_tracking(shipped, spiral_run, capsys):
    assert len(sample_times(shipped.trajectory.M, 1e-3)) == 25133
    errs = {1e-3: float(spiral_run.tracking_error.max())}
    for dt in (2e-3, 4e-3):
        errs[dt] = float(run_trajectory(shipped.model, shipped.trajectory, dt, shipped.initial_q).tracking_error.max())
    order_a = math.log2(errs[4e-3] / errs[2e-3])
    order_b = math.log2(errs[2e-3] / errs[1e-3])
    ok = (errs[1e-3] <= 1e-3 and errs[4e-3] > errs[2e-3] > errs[1e-3]
          and 0.8 <= order_a <= 1.2 and 0.8 <= order_b <= 1.2)
    verdict(capsys, 4, ok, f"max error {errs[1e-3]:.3e} m at dt=1e-3 (<=1e-3); "
                           f"errors {errs[4e-3]:.3e} > {errs[2e-3]:.3e} > {errs[1e-3]:.3e}, "
                           f"observed orders {order_a:.3f}, {order_b:.3f}")


# --- 5 and 7 share a full-resolution pass over the payload grid --------------------

@pytest.fixture(scope="module")
def full_scan(shipped, spiral_run):
    """Full-resolution metrics for every grid payload: psi4 bounds at motoring samples and hold-segment psi2."""
    fn = metrics_for_run(shipped.model, spiral_run, shipped.actuators)
    n_hold = int(np.sum(spiral_run.t < shipped.trajectory.hold))
    lo, hi, n_motoring, hold_psi2 = np.inf, -np.inf, 0, []
    for m in shipped.sweep.grid():
        s = fn(float(m))
        motoring = s.psi1 > 0
        vals = s.psi4[motoring]
        n_motoring += vals.size
        lo, hi = min(lo, float(np.min(vals))), max(hi, float(np.max(vals)))
        hold_psi2.append(s.psi2[:n_hold, 0])
    return {"psi4_min": lo, "psi4_max": hi, "n_motoring": n_motoring, "hold_psi2": np.array(hold_psi2)}


def test_criterion_5_metric_identities(shipped, spiral_run, full_scan, capsys):
    lossless = [Actuator(a.name, replace(a.mechanics, loss=type(a.mechanics.loss)()), replace(a.pmsm, R_s=0.0))
                for a in shipped.actuators]
    _, st = rnea(update_payload(shipped.model, 100.0), spiral_run.q, spiral_run.qdot, spiral_run.qddot)
    s = evaluate_metrics(st, lossless, spiral_run.dt, spiral_run.t)
    exact = bool(np.array_equal(s.psi3, spiral_run.dt * np.cumsum(s.psi1, axis=0)))
    motoring = s.psi1 > 0
    dev = float(np.max(np.abs(s.psi4[motoring] - 1.0)))
    in_range = 0.0 < full_scan["psi4_min"] and full_scan["psi4_max"] < 1.0
    ok = exact and dev <= 1e-12 and in_range
    verdict(capsys, 5, ok, f"eta=1 energy equals dt*sum(psi1) exactly: {exact}; lossless max |psi4 - 1| = {dev:.1e}; "
                           f"lossy psi4 in [{full_scan['psi4_min']:.3e}, {full_scan['psi4_max']:.4f}] over "
                           f"{full_scan['n_motoring']} motoring samples")


# --- 6. Electrical round trip ----------------------------------------------------

def test_criterion_6_torque_round_trip(shipped, capsys):
    worst = 0.0
    standstill_ok = True
    for act in shipped.actuators:
        m = act.pmsm
        T, W = np.meshgrid(np.linspace(-30.0, 30.0, 10), np.linspace(0.0, 600.0, 10), indexing="ij")
        s = steady_state_electrical(m, T, W)
        worst = max(worst, float(np.max(np.abs(em_torque(m, s.i_d, s.i_q) - T))))
        still = W == 0.0
        standstill_ok &= bool(np.allclose(s.V_q[still], m.R_s * s.i_q[still], rtol=1e-15, atol=0))
    ok = worst <= 1e-10 and standstill_ok
    verdict(capsys, 6, ok, f"max torque round-trip error {worst:.1e} N*m over 3 x 100 points (<=1e-10); "
                           f"standstill V_q = R_s i_q: {standstill_ok}")


# --- 7 and 8. End-to-end sweep --------------------------------------------------

@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep") / "serial"
    t0 = time.perf_counter()
    code = cli.main(["run", "--config", str(example_config_path()), "--out", str(out), "--parallel", "1"])
    return out, code, time.perf_counter() - t0


def test_criterion_7_sweep(shipped, full_scan, cli_run, capsys):
    out, code, elapsed = cli_run
    with open(out / "sensitivity.csv") as fh:
        rows = list(csv.DictReader(fh))
    n_metrics_files = len([f for f in os.listdir(out) if f.startswith("metrics_")])
    hold = full_scan["hold_psi2"]
    monotone = bool(np.all(np.diff(hold, axis=0) >= 0))
    ok = code == 0 and elapsed <= 60.0 and len(rows) == 101 * 3 * 4 and n_metrics_files == 101 and monotone
    verdict(capsys, 7, ok, f"exit {code}, {elapsed:.1f} s (<=60 s), {len(rows)} sensitivity rows, "
                           f"{n_metrics_files} payload files; lift psi2 nondecreasing in payload at all "
                           f"{hold.shape[1]} hold samples: {monotone}")


def test_criterion_8_determinism(cli_run, tmp_path, capsys):
    first, code1, _ = cli_run
    second = tmp_path / "parallel"
    code2 = cli.main(["run", "--config", str(example_config_path()), "--out", str(second), "--parallel", "4"])
    names = sorted(f for f in os.listdir(first) if f.endswith(".csv"))
    differing = [f for f in names if (first / f).read_bytes() != (second / f).read_bytes()]
    ok = code1 == 0 and code2 == 0 and not differing and len(names) > 0
    verdict(capsys, 8, ok, f"{len(names)} CSV files compared between --parallel 1 and --parallel 4 runs, "
                           f"{len(differing)} differ")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
