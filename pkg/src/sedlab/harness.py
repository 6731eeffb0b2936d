"""Run orchestration: seeding, parallel dispatch, merging and file output.

Every output file is a pure function of the configuration and master seed.
Work is split into field groups (one trajectory, or an antithetic pair);
results are reassembled in group order before anything is merged, so the
number of worker processes never changes a byte of output.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .diagnostics import (EnergyLedger, bin_probabilities, compare_distributions, gaussian_reference,
                          jackknife_moments, position_histogram_1d, qm_ground_state_radial,
                          radial_histogram, throughput_report)
from .dynamics import simulate_group
from .nearfield import ParticleEM, field_at_offset, preset
from .units import ALPHA, EPS0
from .zeropoint import CollapsedField, ModeEnsemble, sample_modes, window_energy_density

LEDGER_COLUMNS = ("t", "work_in", "radiated", "mech")
HISTOGRAM_COLUMNS = ("bin_lo", "bin_hi", "density", "reference_density")
TRAJECTORY_COLUMNS = ("index", "seed", "status", "t_final", "r_final", "mean_radius")
FIELD_CHECK_CHUNK = 250


class RunFailure(RuntimeError):
    """A worker failed; partial results were discarded."""


def derive_seed(master: int, *keys) -> int:
    """Stable 64-bit seed from the master seed and integer/string keys."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master).to_bytes(8, "little"))
    for key in keys:
        data = key.encode() if isinstance(key, str) else int(key).to_bytes(8, "little", signed=True)
        h.update(len(data).to_bytes(2, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


@dataclass
class RunRecord:
    experiment: str
    config: list
    code_version: str
    seeds: list
    status_counts: dict
    outputs: list
    report: dict
    out_dir: Path
    wall_clock: float = 0.0
    trajectories: list = field(default_factory=list, repr=False)

    def items(self) -> list[tuple[str, str]]:
        """Deterministic key/value lines; wall-clock time is kept out of the file."""
        rows = [("code_version", self.code_version), ("experiment", self.experiment)]
        rows += [(f"config.{k}", v) for k, v in self.config]
        rows.append(("trajectory_seeds", " ".join(str(s) for s in self.seeds)))
        rows += [(f"status.{k}", str(v)) for k, v in self.status_counts.items()]
        rows.append(("outputs", ",".join(self.outputs)))
        return rows


# ---------------------------------------------------------------- file formats

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_numeric_csv(path) -> dict[str, np.ndarray]:
    header, rows = read_csv(path)
    data = np.array([[float(x) for x in row] for row in rows]).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_keyvalue(path: Path, items) -> None:
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key} = {fmt(value)}\n")


def read_keyvalue(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def write_ledger(path: Path, ledger: EnergyLedger) -> None:
    write_csv(path, LEDGER_COLUMNS,
              zip(ledger.t, ledger.work_in, ledger.radiated, ledger.mech))


def read_ledger(path) -> EnergyLedger:
    cols = read_numeric_csv(path)
    return EnergyLedger(cols["t"], cols["work_in"], cols["radiated"], cols["mech"])


def write_histogram(path: Path, hist, reference) -> None:
    ref = bin_probabilities(reference, hist.edges) / hist.widths
    write_csv(path, HISTOGRAM_COLUMNS, zip(hist.edges[:-1], hist.edges[1:], hist.density(), ref))


def write_report(path: Path, report: dict) -> None:
    write_csv(path, ("key", "value"), report.items())


def read_report(path) -> dict[str, str]:
    _, rows = read_csv(path)
    return {k: v for k, v in rows}


def write_ensemble(path: Path, ensemble: ModeEnsemble) -> None:
    """Per-mode CSV of an ensemble, for reproducibility audits."""
    cols = ensemble.to_columns()
    write_csv(path, list(cols), zip(*cols.values()))


def read_ensemble(path, n_dir: int = 1) -> ModeEnsemble:
    c = read_numeric_csv(path)
    vec = lambda name: np.stack([c[f"{name}_{a}"] for a in "xyz"], axis=1)  # noqa: E731
    amps = np.stack([c["a1"], c["a2"], c["b1"], c["b2"]], axis=1)
    return ModeEnsemble(c["omega"], vec("khat"), vec("eps1"), vec("eps2"), amps, c["scale"],
                        None, n_dir)


# ---------------------------------------------------------------- dispatch

def _map(func, jobs, workers: int):
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    try:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(func, jobs))
    except Exception as exc:  # any worker failure voids the whole run
        raise RunFailure(f"worker failed: {exc!r}") from exc


@dataclass(frozen=True)
class _Group:
    index: int
    seed: int
    members: tuple
    strata: tuple | None
    n_strata: int


def plan_groups(config: RunConfig) -> list[_Group]:
    size = 2 if config.pairing == "antithetic" else 1
    members = [tuple(range(i, min(i + size, config.n_traj))) for i in range(0, config.n_traj, size)]
    n_groups = len(members)
    perms = None
    if config.stratify and config.init == "stationary":
        rng = np.random.default_rng(derive_seed(config.seed, "strata"))
        perms = np.stack([rng.permutation(n_groups) for _ in range(3)])
    return [
        _Group(g, derive_seed(config.seed, g), m,
               None if perms is None else tuple(int(x) for x in perms[:, g]), n_groups)
        for g, m in enumerate(members)
    ]


def _run_group(args):
    config, group = args
    rng = np.random.default_rng(group.seed)
    return simulate_group(config.with_seed(group.seed), rng, len(group.members),
                          strata=group.strata, n_strata=group.n_strata,
                          indices=group.members, seed=group.seed)


def run_trajectories(config: RunConfig):
    """All trajectories of a run, in index order, plus their group structure."""
    groups = plan_groups(config)
    results = _map(_run_group, [(config, g) for g in groups], config.workers)
    return [tr for res in results for tr in res], results, groups


# ---------------------------------------------------------------- experiments

def _status_counts(trajectories) -> dict:
    counts = {"completed": 0, "ionized": 0, "diverged": 0}
    for tr in trajectories:
        counts[tr.status] += 1
    return counts


def _trajectory_rows(trajectories, burn_in):
    for tr in trajectories:
        radius = np.linalg.norm(tr.r, axis=1)
        mask = tr.bound_mask(burn_in)
        mean_r = float(radius[mask].mean()) if mask.any() else math.nan
        yield (tr.index, tr.seed, tr.status, tr.t_final, float(radius[-1]), mean_r)


def _ledger_and_throughput(config, trajectories, out: Path, outputs: list, report: dict):
    completed = [tr for tr in trajectories if tr.status == "completed"]
    if not completed:
        write_csv(out / "ledger.csv", LEDGER_COLUMNS, [])
        outputs.append("ledger.csv")
        return None
    ledger = EnergyLedger.total(tr.ledger for tr in completed)
    write_ledger(out / "ledger.csv", ledger)
    outputs.append("ledger.csv")
    report["ledger_trajectories"] = len(completed)
    report["ledger_closure_max"] = float(np.max(np.abs(ledger.closure_defect())))
    if config.t_end > config.burn_in and np.count_nonzero(ledger.t >= config.burn_in) >= 2:
        rep = throughput_report(ledger, (config.burn_in, config.t_end))
        report.update({
            "throughput_t_start": rep.window[0], "throughput_t_end": rep.window[1],
            "mean_p_in": rep.mean_p_in, "mean_p_rad": rep.mean_p_rad,
            "mech_drift": rep.mech_drift, "residual": rep.residual,
            "mech_fluctuation": rep.mech_fluctuation,
            "p_in_over_p_rad": rep.mean_p_in / rep.mean_p_rad if rep.mean_p_rad > 0 else math.nan,
        })
    return ledger


def _common(config, trajectories, out, outputs, report):
    counts = _status_counts(trajectories)
    report.update({f"n_{k}": v for k, v in counts.items()})
    report["dt"], report["n_steps"] = config.step_grid()
    report["burn_in"] = config.burn_in
    write_csv(out / "trajectories.csv", TRAJECTORY_COLUMNS,
              _trajectory_rows(trajectories, config.burn_in))
    outputs.append("trajectories.csv")
    _ledger_and_throughput(config, trajectories, out, outputs, report)
    return counts


def _hydrogen(config, out):
    trajectories, _, groups = run_trajectories(config)
    outputs, report = [], {}
    counts = _common(config, trajectories, out, outputs, report)
    # bound for the whole run: completed trajectories never crossed r_ionize
    report["bound_fraction"] = counts["completed"] / len(trajectories)
    bound_times = [tr.t_final if tr.status != "completed" else config.t_end for tr in trajectories]
    report["mean_bound_time"] = float(np.mean(bound_times))
    report["min_bound_time"] = float(np.min(bound_times))

    hist = radial_histogram(trajectories, config.hist_edges, config.burn_in)
    if hist.normalization > 0:
        hist = hist.normalize()
        cmp = compare_distributions(hist, qm_ground_state_radial)
        report.update({"kl_divergence": cmp.kl, "l2_distance": cmp.l2,
                       "peak_radius": cmp.hist_peak, "reference_peak_radius": cmp.reference_peak,
                       "peak_offset": cmp.peak_offset, "kl_excluded_mass": cmp.excluded_mass,
                       "outside_mass": hist.outside})
    write_histogram(out / "histogram_r.csv", hist, qm_ground_state_radial)
    outputs.append("histogram_r.csv")
    return trajectories, [g.seed for g in groups for _ in g.members], counts, outputs, report


def _oscillator(config, out):
    trajectories, grouped, groups = run_trajectories(config)
    outputs, report = [], {}
    counts = _common(config, trajectories, out, outputs, report)
    reference = gaussian_reference(config.potential.omega)
    report["reference_variance"] = reference.variance
    usable = [[tr for tr in g if tr.status != "diverged"] for g in grouped]
    for axis, name in enumerate("xyz"):
        hist = position_histogram_1d(trajectories, axis, config.hist_edges, config.burn_in)
        if hist.normalization > 0:
            hist = hist.normalize()
            mom, se_var, se_kurt = jackknife_moments(usable, axis, config.burn_in)
            report.update({f"variance_{name}": mom.variance, f"variance_{name}_se": se_var,
                           f"skewness_{name}": mom.skewness,
                           f"excess_kurtosis_{name}": mom.excess_kurtosis,
                           f"excess_kurtosis_{name}_se": se_kurt})
        write_histogram(out / f"histogram_{name}.csv", hist, reference)
        outputs.append(f"histogram_{name}.csv")
    return trajectories, [g.seed for g in groups for _ in g.members], counts, outputs, report


def _inspiral(config, out):
    trajectories, _, groups = run_trajectories(config)
    outputs, report = [], {}
    counts = _common(config, trajectories, out, outputs, report)
    tr = trajectories[0]
    led = tr.ledger
    if len(led) >= 2:
        tc = led.t - led.t.mean()
        slope = float(np.dot(tc, led.mech - led.mech.mean()) / np.dot(tc, tc))
        larmor = -float(np.mean(tr.p_rad))
        # circular inspiral: r^3 = r0^3 - 4 alpha^3 t, E = -1 / (2 r)
        r_exact = np.cbrt(config.r0**3 - 4.0 * ALPHA**3 * led.t * (1.0 if config.radiation else 0.0))
        e_exact = -0.5 / r_exact
        exact_slope = float(np.dot(tc, e_exact - e_exact.mean()) / np.dot(tc, tc))
        report.update({
            "energy_rate": slope, "larmor_rate": larmor, "analytic_rate": exact_slope,
            "rel_error_vs_larmor": abs(slope / larmor - 1.0) if larmor else math.nan,
            "rel_error_vs_analytic": abs(slope / exact_slope - 1.0) if exact_slope else math.nan,
            "mech_monotone": bool(np.all(np.diff(led.mech) < 0)),
        })
    return trajectories, [g.seed for g in groups for _ in g.members], counts, outputs, report


def _field_chunk(args):
    spec, seeds, times = args
    values = np.empty((len(seeds), len(times), 3))
    for i, seed in enumerate(seeds):
        ens = sample_modes(spec, np.random.default_rng(seed))
        cf = CollapsedField.from_ensemble(ens)
        for j, t in enumerate(times):
            values[i, j] = cf.efield(t)
    return values


def field_check_samples(config: RunConfig) -> np.ndarray:
    """E at ``n_times`` times for each of ``n_samples`` resampled ensembles."""
    seeds = [derive_seed(config.seed, s) for s in range(config.n_samples)]
    times = [j * config.time_spacing for j in range(config.n_times)]
    chunks = [seeds[i:i + FIELD_CHECK_CHUNK] for i in range(0, len(seeds), FIELD_CHECK_CHUNK)]
    parts = _map(_field_chunk, [(config.field_spec, c, times) for c in chunks], config.workers)
    return np.concatenate(parts, axis=0)


def _field_check(config, out):
    e = field_check_samples(config)
    spec = config.field_spec
    target = window_energy_density(spec.omega_min, spec.omega_max)
    energy = EPS0 * np.sum(e * e, axis=2)
    per_ensemble = energy.mean(axis=1)
    mean = float(per_ensemble.mean())
    se = float(per_ensemble.std(ddof=1) / math.sqrt(len(per_ensemble)))
    e0 = e[:, 0, :]
    cov = e0.T @ e0 / len(e0)
    # standard error of each second moment from the per-sample products
    prods = e0[:, :, None] * e0[:, None, :]
    cov_se = prods.std(axis=0, ddof=1) / math.sqrt(len(e0))
    report = {
        "window_integral": target, "eps0_mean_e2": mean, "eps0_mean_e2_se": se,
        "rel_error": abs(mean / target - 1.0),
        "eps0_e2_t_first": float(energy[:, 0].mean()),
        "eps0_e2_t_last": float(energy[:, -1].mean()),
        "eps0_e2_t_first_se": float(energy[:, 0].std(ddof=1) / math.sqrt(len(energy))),
        "eps0_e2_t_last_se": float(energy[:, -1].std(ddof=1) / math.sqrt(len(energy))),
        "recurrence_time": spec.recurrence_time,
    }
    for i in range(3):
        for j in range(i, 3):
            report[f"cov_{'xyz'[i]}{'xyz'[j]}"] = float(cov[i, j])
            report[f"cov_{'xyz'[i]}{'xyz'[j]}_se"] = float(cov_se[i, j])
    write_report(out / "report.csv", report)
    return [], [], {"completed": 0, "ionized": 0, "diverged": 0}, ["report.csv"], report


def nearfield_particle(config: RunConfig) -> ParticleEM:
    nf = config.nearfield
    spin = nf["spin"]
    if nf["particle"] == "custom":
        for key in ("z", "mass", "g"):
            if nf[key] is None:
                raise ConfigError(f"{key}: required for particle = custom", key)
        base = ParticleEM(nf["z"], nf["mass"], nf["g"], spin)
    else:
        base = preset(nf["particle"], spin)
        base = ParticleEM(
            base.z if nf["z"] is None else nf["z"],
            base.mass if nf["mass"] is None else nf["mass"],
            base.g if nf["g"] is None else nf["g"],
            spin, base.moment_override,
        )
    if nf["moment"] is not None:
        base = ParticleEM(base.z, base.mass, base.g, spin, nf["moment"])
    return base


def nearfield_rows(config: RunConfig):
    nf = config.nearfield
    fld = field_at_offset(nearfield_particle(config), nf["point"], nf["velocity"], nf["accel"])
    return [(term, *vec) for term, vec in fld.rows()]


def _nearfield(config, out):
    rows = nearfield_rows(config)
    write_csv(out / "nearfield.csv", ("term", "x", "y", "z"), rows)
    report = {f"{row[0]}_{a}": row[1 + k] for row in rows for k, a in enumerate("xyz")}
    return [], [], {"completed": 0, "ionized": 0, "diverged": 0}, ["nearfield.csv"], report


EXPERIMENT_RUNNERS = {
    "hydrogen": _hydrogen,
    "oscillator": _oscillator,
    "inspiral": _inspiral,
    "field-check": _field_check,
    "nearfield": _nearfield,
}


def run_experiment(config: RunConfig) -> RunRecord:
    """Run one experiment and write its output directory.

    Raises :class:`RunFailure` if a worker fails; nothing is written then
    beyond the config echo.
    """
    start = time.perf_counter()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_keyvalue(out / "config.txt", config.echo())
    runner = EXPERIMENT_RUNNERS[config.experiment]
    trajectories, seeds, counts, outputs, report = runner(config, out)
    if config.experiment != "field-check":
        write_report(out / "report.csv", report)
        outputs.append("report.csv")
    outputs = ["config.txt", "run_record.txt"] + [o for o in outputs if o not in ("config.txt",)]
    record = RunRecord(config.experiment, config.echo(), __version__, seeds, counts,
                       sorted(set(outputs)), report, out, trajectories=trajectories)
    write_keyvalue(out / "run_record.txt", record.items())
    record.wall_clock = time.perf_counter() - start
    return record
