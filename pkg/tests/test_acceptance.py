"""Acceptance gate: one test per criterion, each printing a pass/fail line.

These are the desk-scale reference runs (n = 1000 ensembles, the 4x4 homodyne
sweep); expect the module to take tens of minutes on two cores.  Shared heavy
runs live in session fixtures so the bound checks reuse the consistency runs.
"""

import dataclasses

import numpy as np
import pytest
from scipy import stats

from openqb import (
    DickeConfig,
    IntegratorOptions,
    SpinSpinConfig,
    build_dicke,
    build_spin_spin,
    evolve_closed,
    evolve_unconditional,
    run_ensemble,
    run_pd_trajectory,
)
from openqb.harness import ExperimentConfig, SweepSpec, run_sweep
from openqb.harness.runner import run_experiment
from openqb.hilbert import PureState, trace_distance
from openqb.models import basis_vector
from openqb.thermo import (
    BatterySpectrum,
    battery_energy,
    charging_power,
    ergotropy,
    ergotropy_from_populations,
)
from openqb.trajectories import UnravelingKind

from conftest import haar_unitaries, random_density, random_pure

SEED = 20260810
N_TRAJ = 1000
PD = UnravelingKind.photodetection()
HD = UnravelingKind.homodyne(0.0)


def report(criterion: str, passed: bool, detail: str = "") -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] {criterion}" + (f" — {detail}" if detail else ""))


def erg_series(series, spectrum):
    pops = np.clip(np.linalg.eigvalsh(series.battery_stack())[..., ::-1], 0.0, None)
    return ergotropy_from_populations(pops, spectrum.expanded(),
                                      series.observables["energy"])


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def spin_spin_case():
    """Weak-coupling lossy spin-spin reference run with both unravelings."""
    model = build_spin_spin(SpinSpinConfig(omega=1.0, g_b=0.1, g_c=0.2, gamma=0.2))
    opts = IntegratorOptions.from_grid(t_max=15.0, n_samples=61, dt=1e-3)
    lb = evolve_unconditional(model, opts)
    ens = {
        kind.short: run_ensemble(model, opts, kind, N_TRAJ, SEED,
                                 track_full_average=True)
        for kind in (PD, HD)
    }
    return model, opts, lb, ens


@pytest.fixture(scope="module")
def dicke_case():
    """Desk-scale collective battery (N=4, N_ph=20) reference run."""
    model = build_dicke(DickeConfig(omega=1.0, lambda_bar=1.0, kappa=0.5,
                                    n_tls=4, n_ph=20))
    opts = IntegratorOptions.from_grid(t_max=5.0, n_samples=51, dt=1e-3)
    lb = evolve_unconditional(model, opts)
    ens = {
        kind.short: run_ensemble(model, opts, kind, N_TRAJ, SEED,
                                 track_full_average=True)
        for kind in (PD, HD)
    }
    return model, opts, lb, ens


def _bound_violation(model, lb, summary):
    spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
    eps = erg_series(lb, spectrum)
    energy = lb.observables["energy"]
    slack = 3.0 * summary.ergotropy_std / np.sqrt(summary.n_traj)
    lower = eps - slack - summary.ergotropy_mean
    upper = summary.ergotropy_mean - (energy + slack)
    return max(float(lower.max()), float(upper.max()))


# ---------------------------------------------------------------- criteria

def test_criterion_1_resonant_transfer():
    """Spin-spin, gamma=0, g_B=g_C=omega/10: complete energy transfer."""
    model = build_spin_spin(SpinSpinConfig(omega=1.0, g_b=0.1, g_c=0.1, gamma=0.0))
    opts = IntegratorOptions.from_grid(t_max=40.0, n_samples=401, dt=2e-3)
    ser = evolve_closed(model, opts)
    peak = float(ser.observables["energy"].max())
    ok = peak >= 0.95
    report("1 resonant transfer", ok, f"max battery energy = {peak:.4f} omega")
    assert ok


@pytest.mark.parametrize("case_name", ["spin_spin", "dicke"])
def test_criterion_2_unraveling_consistency(case_name, spin_spin_case, dicke_case):
    """E[|psi><psi|] equals the master-equation state within 5/sqrt(n)."""
    model, opts, lb, ens = spin_spin_case if case_name == "spin_spin" else dicke_case
    tol = 5.0 / np.sqrt(N_TRAJ)
    worst = {}
    for short, summary in ens.items():
        td = max(trace_distance(summary.mean_full_states[i], lb.states[i].matrix)
                 for i in range(len(opts.sampling_times)))
        worst[short] = td
    ok = all(v <= tol for v in worst.values())
    report(f"2 unraveling consistency [{case_name}]", ok,
           ", ".join(f"{k}: max TD {v:.4f} (tol {tol:.4f})" for k, v in worst.items()))
    assert ok


@pytest.mark.parametrize("case_name", ["spin_spin", "dicke"])
def test_criterion_3_daemonic_bounds(case_name, spin_spin_case, dicke_case):
    """eps - 3 sigma/sqrt(n) <= daemonic ergotropy <= E + 3 sigma/sqrt(n)."""
    model, opts, lb, ens = spin_spin_case if case_name == "spin_spin" else dicke_case
    worst = {short: _bound_violation(model, lb, summary)
             for short, summary in ens.items()}
    ok = all(v <= 0.0 for v in worst.values())
    report(f"3 daemonic bounds [{case_name}]", ok,
           ", ".join(f"{k}: worst excess {v:.2e}" for k, v in worst.items()))
    assert ok


def test_criterion_4_analytic_decay_and_waiting_times():
    """Lossy-cavity oracles: exponential <a†a>(t) and exponential waiting times."""
    # spin-spin convention: rate gamma
    gamma = 0.8
    m = build_spin_spin(SpinSpinConfig(omega=1.0, g_b=0.0, g_c=0.0, gamma=gamma, n_ph=4))
    psi = np.kron(np.kron(basis_vector(2, 0), basis_vector(2, 0)), basis_vector(5, 1))
    m = dataclasses.replace(m, initial_state=PureState(psi, m.layout))
    opts = IntegratorOptions.from_grid(4.0, 21, 1e-3)
    ser = evolve_unconditional(m, opts)
    n_t = np.array([
        float((np.diag(s.matrix).real.reshape(m.layout.dims).sum(axis=(0, 1))
               * np.arange(5)).sum()) for s in ser.states])
    err_ss = float(np.max(np.abs(n_t - np.exp(-gamma * ser.times))
                          / np.exp(-gamma * ser.times)))

    # collective convention: rate 2 kappa, starting from |N>
    kappa, n = 0.3, 2
    md = build_dicke(DickeConfig(omega=1.0, lambda_bar=0.0, kappa=kappa, n_tls=n, n_ph=4))
    serd = evolve_unconditional(md, opts)
    n_td = np.array([
        float((np.diag(s.matrix).real.reshape(md.layout.dims).sum(axis=1)
               * np.arange(5)).sum()) for s in serd.states])
    expected = n * np.exp(-2 * kappa * serd.times)
    err_d = float(np.max(np.abs(n_td - expected) / expected))

    # waiting-time law over 1000 seeds
    m1 = build_spin_spin(SpinSpinConfig(omega=1.0, g_b=0.0, g_c=0.0, gamma=1.0, n_ph=2))
    psi1 = np.kron(np.kron(basis_vector(2, 0), basis_vector(2, 0)), basis_vector(3, 1))
    m1 = dataclasses.replace(m1, initial_state=PureState(psi1, m1.layout))
    opts1 = IntegratorOptions.from_grid(25.0, 6, 1e-2)
    waits = []
    for seed in range(1000):
        rec = run_pd_trajectory(m1, opts1, seed=seed)
        assert rec.n_jumps == 1
        waits.append(rec.record[0])
    pvalue = float(stats.kstest(waits, "expon", args=(0, 1.0)).pvalue)

    ok = err_ss < 1e-6 and err_d < 1e-6 and pvalue > 0.01
    report("4 analytic decay oracle", ok,
           f"rel err gamma-decay {err_ss:.2e}, 2kappa-decay {err_d:.2e}, KS p {pvalue:.3f}")
    assert ok


def test_criterion_5_ergotropy_oracle():
    """Spectral ergotropy beats 1e5 random extraction unitaries; pure states
    yield their full shifted energy."""
    rng = np.random.default_rng(SEED)
    worst_gap = -np.inf
    for d in (2, 3, 4, 6):
        levels = tuple((k * 0.9, 1) for k in range(d))
        spec = BatterySpectrum(levels)
        h = np.diag(spec.expanded()).astype(complex)
        rho = random_density(rng, d)
        eps = ergotropy(rho, spec, h_b=h)
        n_u = 100_000
        best = -np.inf
        for chunk in range(4):
            us = haar_unitaries(rng, n_u // 4, d)
            rotated = us @ rho @ us.conj().transpose(0, 2, 1)
            energies = np.einsum("ij,kji->k", h, rotated).real
            best = max(best, battery_energy(rho, h) - energies.min())
        worst_gap = max(worst_gap, best - eps)
    pure_dev = 0.0
    for d in (2, 4, 6):
        levels = tuple((k * 1.3, 1) for k in range(d))
        spec = BatterySpectrum(levels)
        h = np.diag(spec.expanded()).astype(complex)
        psi = random_pure(rng, d)
        rho = np.outer(psi, psi.conj())
        pure_dev = max(pure_dev, abs(ergotropy(rho, spec, h_b=h) - battery_energy(rho, h)))
    ok = worst_gap <= 1e-9 and pure_dev <= 1e-10
    report("5 ergotropy oracle", ok,
           f"best unitary excess {worst_gap:.2e}, pure-state deviation {pure_dev:.2e}")
    assert ok


@pytest.fixture(scope="module")
def desk_sweep(tmp_path_factory):
    template = ExperimentConfig(
        model_kind="dicke",
        model=DickeConfig(omega=1.0, lambda_bar=1.0, kappa=0.5, n_tls=4),
        unraveling="none", n_traj=200, master_seed=SEED,
        t_max=6.0, n_samples=241,
        out_dir=str(tmp_path_factory.mktemp("sweep")), label="desk",
    )
    spec = SweepSpec(
        axis1_name="lambda_bar", axis1_values=(0.5, 1.0, 1.5, 2.0),
        axis2_name="kappa", axis2_values=(0.1, 0.5, 1.0, 2.0),
        template=template, unravelings=("hd",),
    )
    return run_sweep(spec)


def test_criterion_6_monitoring_beats_ideal(desk_sweep):
    """Some desk-sweep cell shows daemonic ergotropy above the ideal
    dissipation-free value by more than 3 Monte Carlo standard errors."""
    sw = desk_sweep
    assert all(row[-1] == "ok" for row in sw.rows)
    e_bar = sw.column("daemonic_ergotropy_hd").astype(float)
    std = sw.column("daemonic_ergotropy_hd_std").astype(float)
    eps0 = sw.column("ergotropy_ideal").astype(float)
    margin = e_bar - eps0 - 3.0 * std / np.sqrt(200)
    best = int(np.argmax(margin))
    ok = bool(margin[best] > 0)
    report("6 monitoring beats ideal", ok,
           f"best cell lambda={sw.rows[best][0]}, kappa={sw.rows[best][1]}: "
           f"Ebar {e_bar[best]:.4f} vs eps0 {eps0[best]:.4f} "
           f"(margin {margin[best]:+.4f})")
    assert ok


def test_criterion_7_timing_ordering():
    """Power peaks first, then ergotropy, then energy (lambda=omega, N=6)."""
    model = build_dicke(DickeConfig(omega=1.0, lambda_bar=1.0, kappa=0.5, n_tls=6))
    opts = IntegratorOptions.from_grid(t_max=5.0, n_samples=501, dt=1e-3)
    ser = evolve_unconditional(model, opts, keep_full_states=False)
    spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
    energy = ser.observables["energy"]
    eps = erg_series(ser, spectrum)
    power = charging_power(energy, ser.times)
    t_p = float(ser.times[np.argmax(power)])
    t_e = float(ser.times[np.argmax(eps)])
    t_en = float(ser.times[np.argmax(energy)])
    ok = t_p < t_e < t_en
    report("7 timing ordering", ok, f"t(P)={t_p:.3f} < t(eps)={t_e:.3f} < t(E)={t_en:.3f}")
    assert ok


def test_criterion_8_scaling_exponents():
    """Closed-system peaks over N in {2,3,4,6}: E and eps exponents within
    1 +- 0.15, P within 1.5 +- 0.2."""
    ns = (2, 3, 4, 6)
    peaks = {"energy": [], "power": [], "ergotropy": []}
    for n in ns:
        model = build_dicke(DickeConfig(omega=1.0, lambda_bar=1.0, kappa=0.0, n_tls=n))
        opts = IntegratorOptions.from_grid(t_max=4.0, n_samples=401, dt=1e-3)
        ser = evolve_closed(model, opts)
        spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
        energy = ser.observables["energy"]
        peaks["energy"].append(energy.max())
        peaks["power"].append(charging_power(energy, ser.times).max())
        peaks["ergotropy"].append(erg_series(ser, spectrum).max())
    fits = {name: stats.linregress(np.log(ns), np.log(vals))
            for name, vals in peaks.items()}
    ok_e = abs(fits["energy"].slope - 1.0) <= 0.15
    ok_p = abs(fits["power"].slope - 1.5) <= 0.2
    ok_eps = abs(fits["ergotropy"].slope - 1.0) <= 0.15
    detail = ", ".join(f"{k}: {v.slope:.3f}+-{v.stderr:.3f}" for k, v in fits.items())
    report("8 scaling exponents", ok_e and ok_p and ok_eps, detail)
    assert ok_e, f"energy exponent {fits['energy'].slope:.3f} outside 1 +- 0.15"
    assert ok_p, f"power exponent {fits['power'].slope:.3f} outside 1.5 +- 0.2"
    # Known desk-scale limitation: the ergotropy exponent over these small N
    # sits near 1.23 for every convention tried (it approaches 1 only as the
    # fit window moves to larger N), so this clause fails honestly.
    assert ok_eps, (
        f"ergotropy exponent {fits['ergotropy'].slope:.3f} +- "
        f"{fits['ergotropy'].stderr:.3f} outside 1 +- 0.15 at N = {ns}"
    )


@pytest.mark.parametrize("case_name", ["spin_spin", "dicke"])
def test_criterion_9_efficiency_range(case_name, spin_spin_case, dicke_case):
    """eta within [-mc_tol, 1 + mc_tol] on the reference runs; eta = 0 with no
    jump operator."""
    model, opts, lb, ens = spin_spin_case if case_name == "spin_spin" else dicke_case
    spectrum = BatterySpectrum.from_levels(model.h_battery_spectrum, "full")
    eps = erg_series(lb, spectrum)
    energy = lb.observables["energy"]
    worst_low, worst_high = 0.0, 0.0
    for summary in ens.values():
        gap = energy - eps
        mask = gap > 1e-9
        eta = (summary.ergotropy_mean[mask] - eps[mask]) / gap[mask]
        mc = 3.0 * summary.ergotropy_std[mask] / np.sqrt(summary.n_traj) / gap[mask]
        worst_low = min(worst_low, float((eta + mc).min()))
        worst_high = max(worst_high, float((eta - mc - 1.0).max()))
    ok = worst_low >= 0.0 - 1e-12 and worst_high <= 0.0 + 1e-12
    report(f"9 efficiency range [{case_name}]", ok,
           f"min(eta+tol) {worst_low:.3f}, max(eta-tol-1) {worst_high:.3f}")
    assert ok


def test_criterion_9_efficiency_zero_without_monitoring(tmp_path):
    # with no jump operator the conditional states are the unconditional one,
    # so eta vanishes identically (the photodetection path shares the RK4
    # stepper, making the comparison exact; the homodyne stepper differs from
    # it only by its O(dt) Euler error, checked to shrink with dt)
    base = ExperimentConfig(
        model_kind="spin_spin",
        model=SpinSpinConfig(omega=1.0, g_b=0.1, g_c=0.1, gamma=0.0, n_ph=5),
        unraveling="pd", n_traj=8, master_seed=SEED,
        t_max=20.0, n_samples=11, out_dir=str(tmp_path), label="eta0",
    )
    res = run_experiment(base, write=False)
    eta = res.columns["daemonic_efficiency"]
    ok = bool(np.all(np.abs(eta) < 1e-10))

    hd = run_experiment(base.replace(unraveling="hd"), write=False)
    hd_half = run_experiment(base.replace(unraveling="hd", dt=5e-4), write=False)
    dev = float(np.max(np.abs(hd.columns["daemonic_efficiency"])))
    dev_half = float(np.max(np.abs(hd_half.columns["daemonic_efficiency"])))
    ok = ok and dev_half < 0.65 * dev
    report("9 efficiency zero at c=0", ok,
           f"pd max |eta| = {np.max(np.abs(eta)):.2e}; "
           f"hd Euler residue {dev:.2e} -> {dev_half:.2e} at dt/2")
    assert ok


def test_criterion_10_determinism(tmp_path):
    """Same master seed: byte-identical CSV numerics, serial vs parallel."""
    base = ExperimentConfig(
        model_kind="dicke",
        model=DickeConfig(omega=1.0, lambda_bar=0.8, kappa=0.4, n_tls=2, n_ph=8),
        unraveling="hd", n_traj=16, master_seed=SEED,
        t_max=2.0, n_samples=21, out_dir=str(tmp_path), label="det",
    )
    a = run_experiment(base.replace(label="a", workers=1))
    b = run_experiment(base.replace(label="b", workers=2))
    c = run_experiment(base.replace(label="c", workers=2))
    ok = (a.csv_path.read_bytes() == b.csv_path.read_bytes()
          == c.csv_path.read_bytes())
    report("10 determinism", ok, "serial, parallel and repeated runs byte-identical")
    assert ok
