"""Energy-throughput bookkeeping and ensemble statistics.

Powers are in Hartree per atomic time unit.  Histograms and ledgers merge by
summation; callers merge in trajectory-index order so results do not depend
on how work was split across processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .units import TAU_E

# bins whose reference probability falls below this are left out of the KL sum
KL_REFERENCE_FLOOR = 1e-15
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def larmor_power(a, *, tau: float = TAU_E):
    """Radiated power (2/3) alpha^3 |a|^2 for acceleration ``a`` (last axis)."""
    a = np.asarray(a, dtype=float)
    out = tau * np.sum(a * a, axis=-1)
    return float(out) if out.ndim == 0 else out


def input_power(e_field, v, *, charge: float = -1.0):
    """Rate of work done by the field on the charge, q E . v."""
    e_field = np.asarray(e_field, dtype=float)
    v = np.asarray(v, dtype=float)
    out = charge * np.sum(e_field * v, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class EnergyLedger:
    """Cumulative field work, radiated energy and mechanical energy at sample times."""

    t: np.ndarray
    work_in: np.ndarray
    radiated: np.ndarray
    mech: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.work_in = np.asarray(self.work_in, dtype=float)
        self.radiated = np.asarray(self.radiated, dtype=float)
        self.mech = np.asarray(self.mech, dtype=float)
        n = self.t.shape[0]
        if not all(a.shape == (n,) for a in (self.work_in, self.radiated, self.mech)):
            raise ValueError("ledger columns must have equal length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("ledger times must be strictly increasing")
        finite = np.isfinite(self.radiated)
        if np.any(self.radiated[finite] < 0) or np.any(np.diff(self.radiated[finite]) < 0):
            raise ValueError("radiated energy must be non-negative and non-decreasing")

    def __len__(self):
        return self.t.shape[0]

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        """Sum of two ledgers sampled on the same time grid."""
        if self.t.shape != other.t.shape or not np.array_equal(self.t, other.t):
            raise ValueError("ledgers must share a time grid to merge")
        return EnergyLedger(self.t, self.work_in + other.work_in,
                            self.radiated + other.radiated, self.mech + other.mech)

    @staticmethod
    def total(ledgers: Iterable["EnergyLedger"]) -> "EnergyLedger":
        it = iter(ledgers)
        try:
            acc = next(it)
        except StopIteration:
            raise ValueError("no ledgers to merge") from None
        for led in it:
            acc = acc.merge(led)
        return acc

    def closure_defect(self) -> np.ndarray:
        """mech(t) - mech(0) - (work_in(t) - radiated(t)); zero up to the Schott term."""
        return (self.mech - self.mech[0]) - (
            (self.work_in - self.work_in[0]) - (self.radiated - self.radiated[0])
        )


@dataclass(frozen=True)
class ThroughputReport:
    mean_p_in: float
    mean_p_rad: float
    mech_drift: float
    residual: float
    window: tuple[float, float]
    mech_fluctuation: float = 0.0


def _ls_slope(t, y):
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def throughput_report(ledger: EnergyLedger, window: tuple[float, float]) -> ThroughputReport:
    """Mean input and radiated power over ``window`` and the mechanical drift.

    ``residual`` is |P_in - P_rad - drift| / P_rad with the drift taken as the
    least-squares slope of mechanical energy; ``mech_fluctuation`` is the RMS
    of the detrended mechanical energy.
    """
    t0, t1 = window
    sel = (ledger.t >= t0) & (ledger.t <= t1)
    idx = np.flatnonzero(sel)
    if idx.size < 2:
        raise ValueError(f"window {window} holds fewer than two ledger samples")
    t = ledger.t[idx]
    span = t[-1] - t[0]
    p_in = float(ledger.work_in[idx[-1]] - ledger.work_in[idx[0]]) / span
    p_rad = float(ledger.radiated[idx[-1]] - ledger.radiated[idx[0]]) / span
    mech = ledger.mech[idx]
    drift = _ls_slope(t, mech)
    detrended = mech - mech.mean() - drift * (t - t.mean())
    residual = abs(p_in - p_rad - drift) / p_rad if p_rad > 0 else math.nan
    return ThroughputReport(p_in, p_rad, drift, residual, (float(t[0]), float(t[-1])),
                            float(np.sqrt(np.mean(detrended**2))))


@dataclass(eq=False)
class Histogram:
    """Weighted occupation of bins; ``outside`` collects weight beyond the edges."""

    edges: np.ndarray
    counts: np.ndarray
    normalization: float
    outside: float = 0.0

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.edges.ndim != 1 or self.edges.size < 2 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if self.counts.shape != (self.edges.size - 1,):
            raise ValueError("counts must have one entry per bin")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, edges) -> "Histogram":
        edges = np.asarray(edges, dtype=float)
        return cls(edges, np.zeros(edges.size - 1), 0.0)

    @classmethod
    def from_samples(cls, values, weights, edges) -> "Histogram":
        values = np.asarray(values, dtype=float)
        weights = np.broadcast_to(np.asarray(weights, dtype=float), values.shape)
        edges = np.asarray(edges, dtype=float)
        counts, _ = np.histogram(values, bins=edges, weights=weights)
        total = float(counts.sum())
        return cls(edges, counts, total, float(weights.sum()) - total)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("histograms must share bin edges to merge")
        return Histogram(self.edges, self.counts + other.counts,
                         self.normalization + other.normalization, self.outside + other.outside)

    def normalize(self) -> "Histogram":
        if self.normalization <= 0:
            raise ValueError("cannot normalize an empty histogram")
        return Histogram(self.edges, self.counts / self.normalization, 1.0,
                         self.outside / self.normalization)

    @property
    def is_normalized(self) -> bool:
        return abs(self.normalization - 1.0) < 1e-12 and abs(self.counts.sum() - 1.0) < 1e-9

    def density(self) -> np.ndarray:
        if self.normalization <= 0:
            return np.zeros_like(self.counts)
        return self.counts / self.normalization / self.widths


RadialHistogram = Histogram


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    """Time weight of each sample under the trapezoid rule."""
    w = np.zeros_like(t)
    if t.size > 1:
        d = np.diff(t)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def _bound_segments(trajectories, burn_in):
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    usable = [tr for tr in trajectories if tr.status != "diverged"]
    segments = []
    lost_early = 0
    for tr in usable:
        mask = tr.bound_mask(burn_in)
        if tr.status == "ionized" and tr.t_final < burn_in:
            lost_early += 1
        if np.count_nonzero(mask) >= 1:
            segments.append((tr, mask))
    if usable and lost_early == len(usable):
        raise ValueError("every trajectory ionized before the end of burn-in")
    return segments


def _accumulate(trajectories, edges, burn_in, values_of):
    hist = Histogram.empty(edges)
    for tr, mask in _bound_segments(trajectories, burn_in):
        t = tr.t[mask]
        hist = hist.merge(Histogram.from_samples(values_of(tr)[mask], trapezoid_weights(t), edges))
    return hist


def radial_histogram(trajectories: Sequence, edges, burn_in: float = 0.0) -> Histogram:
    """Time-weighted occupancy of |r| over the bound, post-burn-in samples."""
    return _accumulate(trajectories, edges, burn_in, lambda tr: np.linalg.norm(tr.r, axis=1))


def position_histogram_1d(trajectories: Sequence, axis: int, edges,
                          burn_in: float = 0.0) -> Histogram:
    """Time-weighted occupancy of one Cartesian coordinate."""
    return _accumulate(trajectories, edges, burn_in, lambda tr: tr.r[:, axis])


def qm_ground_state_radial(r):
    """Hydrogen ground-state radial probability density 4 r^2 exp(-2 r)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    out = 4.0 * r * r * np.exp(-2.0 * r)
    return float(out) if out.ndim == 0 else out


def gaussian_reference(omega: float) -> Callable:
    """Oscillator ground-state position density: mean 0, variance 1/(2 omega)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    var = 0.5 / omega

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)
        return float(out) if out.ndim == 0 else out

    density.variance = var
    return density


def bin_probabilities(reference: Callable, edges) -> np.ndarray:
    """Integral of ``reference`` over each bin (16-point Gauss-Legendre)."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(reference(x), dtype=float)
    return np.sum(vals * _GL_WEIGHTS[None, :], axis=1) * half


def binned_reference(reference: Callable, edges) -> Histogram:
    probs = bin_probabilities(reference, edges)
    return Histogram(edges, probs, float(probs.sum()))


@dataclass(frozen=True)
class DistributionComparison:
    l2: float
    kl: float
    peak_offset: float
    excluded_mass: float
    hist_peak: float
    reference_peak: float


def compare_distributions(hist: Histogram, reference: Callable) -> DistributionComparison:
    """L2 distance of densities, KL(hist || reference) and peak-bin offset.

    Bins where the reference probability is positive but below
    ``KL_REFERENCE_FLOOR`` are dropped from the KL sum and their histogram
    mass is returned as ``excluded_mass``.  An occupied bin where the
    reference is exactly zero makes the KL infinite.
    """
    if not hist.is_normalized:
        raise ValueError("histogram must be normalized")
    p = hist.counts
    q = bin_probabilities(reference, hist.edges)
    widths = hist.widths
    l2 = float(math.sqrt(np.sum((p / widths - q / widths) ** 2 * widths)))

    occupied = p > 0
    if np.any(occupied & (q == 0)):
        kl = math.inf
        excluded = float(p[occupied & (q == 0)].sum())
    else:
        keep = occupied & (q >= KL_REFERENCE_FLOOR)
        excluded = float(p[occupied & (q < KL_REFERENCE_FLOOR)].sum())
        kl = float(np.sum(p[keep] * np.log(p[keep] / q[keep])))
        kl = max(kl, 0.0) if abs(kl) < 1e-15 else kl

    centers = hist.centers
    hist_peak = float(centers[np.argmax(p / widths)])
    ref_peak = float(centers[np.argmax(q / widths)])
    return DistributionComparison(l2, kl, abs(hist_peak - ref_peak), excluded, hist_peak, ref_peak)


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    weight: float


def _moments_from_sums(sums) -> Moments:
    w, s1, s2, s3, s4 = sums
    if w <= 0:
        raise ValueError("total weight must be positive")
    mean = s1 / w
    m2 = s2 / w - mean**2
    m3 = s3 / w - 3 * mean * s2 / w + 2 * mean**3
    m4 = s4 / w - 4 * mean * s3 / w + 6 * mean**2 * s2 / w - 3 * mean**4
    return Moments(float(mean), float(m2), float(m3 / m2**1.5), float(m4 / m2**2 - 3.0), float(w))


def _power_sums(values, weights) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    x2 = values * values
    return np.array([weights.sum(), np.dot(weights, values), np.dot(weights, x2),
                     np.dot(weights, x2 * values), np.dot(weights, x2 * x2)])


def weighted_moments(values, weights) -> Moments:
    return _moments_from_sums(_power_sums(values, weights))


def _component_sums(trajectories, axis, burn_in) -> np.ndarray:
    sums = np.zeros(5)
    for tr, mask in _bound_segments(trajectories, burn_in):
        sums += _power_sums(tr.r[mask, axis], trapezoid_weights(tr.t[mask]))
    return sums


def component_moments(trajectories: Sequence, axis: int, burn_in: float = 0.0) -> Moments:
    """Time-weighted moments of one position component over bound samples."""
    return _moments_from_sums(_component_sums(trajectories, axis, burn_in))


def jackknife_moments(groups: Sequence[Sequence], axis: int, burn_in: float = 0.0):
    """Moments plus delete-one-group jackknife errors of variance and excess kurtosis.

    ``groups`` are lists of trajectories sharing a field realization; groups
    are the independent units.
    """
    per_group = np.array([_component_sums(g, axis, burn_in) for g in groups if g])
    total = per_group.sum(axis=0)
    full = _moments_from_sums(total)
    n = per_group.shape[0]
    if n < 2:
        return full, math.nan, math.nan
    loo = [_moments_from_sums(total - row) for row in per_group]
    var_j = np.array([m.variance for m in loo])
    kurt_j = np.array([m.excess_kurtosis for m in loo])
    factor = (n - 1) / n
    se_var = math.sqrt(factor * np.sum((var_j - var_j.mean()) ** 2))
    se_kurt = math.sqrt(factor * np.sum((kurt_j - kurt_j.mean()) ** 2))
    return full, se_var, se_kurt
