"""Weighted multi-predictor ensembles and their calibration.

The ensemble prediction is the weighted mean of its member predictions,
theta_ens = sum_j a_j theta_j / sum_j a_j, and calibration minimizes the
sum of squared errors chi2(a) against observed water contents with a
real-coded genetic algorithm over genomes in [0, 1]^m. Because the search
space contains every single-member corner, a calibrated ensemble is never
worse than its best member on the calibration points; the optimizer ends
with an explicit corner sweep so that holds exactly, not just in
expectation.

Uncertainty comes from bootstrap replicas: each replica resamples whole
samples with replacement, calibrates on the drawn points, and validates on
the out-of-bag samples. Stratified calibration runs the same procedure per
stratum and falls back to the global weights for strata with too few points.

All randomness derives from one master seed. Replica r of a calibration
seeds its bootstrap draw with (seed..., r, 0) and its optimizer with
(seed..., r, 1); stratum calibrations extend the seed with a crc32 of the
stratum key. Reruns are bit-identical.
"""

import csv
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import DEFAULT_OC_EDGES, bootstrap_split, stratify, stratum_key
from .errors import ConfigError, InputError, MemberPredictionError, PtfensError
from .ptf import PtfId, predict, predict_batch, required_inputs
from .retention import FIELD_CAPACITY_HEAD, WILTING_POINT_HEAD, theta_at

GLOBAL_STRATUM = "global"


@dataclass(frozen=True)
class WeightVector:
    """Normalized member weights; members keep their given order."""

    members: tuple
    weights: tuple

    def __post_init__(self):
        if not self.members:
            raise InputError("weight vector needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise InputError("duplicate ensemble members")
        if len(self.weights) != len(self.members):
            raise InputError("one weight per member required")
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0.0) or np.any(w > 1.0 + 1e-12):
            raise InputError("weights must lie in [0, 1]")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise InputError(f"weights must sum to 1, got {w.sum()!r}")

    @classmethod
    def normalized(cls, members, raw):
        raw = np.asarray(raw, dtype=np.float64)
        if np.any(raw < 0.0) or not np.all(np.isfinite(raw)):
            raise InputError("raw weights must be finite and non-negative")
        total = raw.sum()
        if total <= 0.0:  # degenerate genome: fall back to the uniform mix
            raw = np.ones_like(raw)
            total = raw.sum()
        return cls(members=tuple(members), weights=tuple(raw / total))

    def as_array(self):
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class GaConfig:
    population: int = 50
    generations: int = 200
    stall_generations: int = 30
    crossover_prob: float = 0.8
    blx_alpha: float = 0.5
    mutation_prob: float = 0.1
    mutation_sigma: float = 0.1
    tournament: int = 3
    elitism: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population < 2 or self.tournament < 1 or self.generations < 1:
            raise ConfigError("population >= 2, tournament >= 1, generations >= 1")
        if not 0 <= self.elitism < self.population:
            raise ConfigError("elitism must be smaller than the population")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.mutation_sigma < 0.0 or self.blx_alpha < 0.0:
            raise ConfigError("mutation_sigma and blx_alpha must be non-negative")


def chi2(weights, member_preds, observed):
    """Sum of squared errors of the weighted-mean ensemble."""
    if isinstance(weights, WeightVector):
        weights = weights.as_array()
    weights = np.asarray(weights, dtype=np.float64)
    member_preds = np.asarray(member_preds, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if member_preds.shape != (weights.size, observed.size):
        raise InputError(f"member predictions shape {member_preds.shape} does not match "
                         f"{weights.size} members x {observed.size} points")
    total = weights.sum()
    if total <= 0.0:
        weights = np.ones_like(weights)
        total = weights.sum()
    ens = (weights / total) @ member_preds
    return float(np.sum((ens - observed) ** 2))


def member_thetas(members, rec, psi):
    """Stacked member predictions for one record; fails naming the member."""
    rows = []
    for m in members:
        try:
            params = predict(m, rec)
            rows.append(np.atleast_1d(np.asarray(theta_at(params, psi), dtype=np.float64)))
        except PtfensError as exc:
            raise MemberPredictionError(f"member {PtfId(m)}: {exc}") from exc
    return np.stack(rows)


def ensemble_theta(weights, rec, psi):
    """Weighted-mean water content for one record at one or more heads."""
    thetas = member_thetas(weights.members, rec, psi)
    out = weights.as_array() @ thetas
    return float(out[0]) if np.ndim(psi) == 0 else out


def _seed_path(seed):
    """Normalize an int or tuple-of-ints master seed into a tuple."""
    path = (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)
    if not path or any(int(p) < 0 for p in path):
        raise InputError(f"seed must be non-negative, got {seed!r}")
    return tuple(int(p) for p in path)


def optimize_weights(member_preds, observed, config=None, rng=None, members=None):
    """Fit ensemble weights to observations with the genetic algorithm.

    member_preds has one row per member; observed is the target vector.
    The initial population contains every single-member corner and the
    uniform mix, and the returned vector is the better of the GA optimum
    and the best corner.
    """
    cfg = config or GaConfig()
    member_preds = np.ascontiguousarray(member_preds, dtype=np.float64)
    observed = np.ascontiguousarray(observed, dtype=np.float64)
    if member_preds.ndim != 2 or member_preds.shape[1] != observed.size:
        raise InputError(f"member predictions shape {member_preds.shape} does not match "
                         f"{observed.size} points")
    n_members = member_preds.shape[0]
    if members is None:
        members = tuple(f"member_{j}" for j in range(n_members))
    if len(members) != n_members:
        raise InputError("member id list does not match the prediction rows")
    if rng is None:
        rng = np.random.default_rng(_seed_path(cfg.seed))

    pop = rng.random((cfg.population, n_members))
    for j in range(min(n_members, cfg.population)):  # seed the corners
        pop[j] = 0.0
        pop[j, j] = 1.0
    if n_members < cfg.population:
        pop[n_members] = 1.0  # the uniform mix

    fitness = _kernels.chi2_population(pop, member_preds, observed)
    best_idx = int(np.argmin(fitness))
    best_genome = pop[best_idx].copy()
    best_chi2 = float(fitness[best_idx])

    stall = 0
    for _ in range(cfg.generations):
        order = np.argsort(fitness)
        new_pop = np.empty_like(pop)
        new_pop[:cfg.elitism] = pop[order[:cfg.elitism]]
        for i in range(cfg.elitism, cfg.population):
            c1 = rng.integers(0, cfg.population, size=cfg.tournament)
            p1 = pop[c1[np.argmin(fitness[c1])]]
            if rng.random() < cfg.crossover_prob:
                c2 = rng.integers(0, cfg.population, size=cfg.tournament)
                p2 = pop[c2[np.argmin(fitness[c2])]]
                lo = np.minimum(p1, p2) - cfg.blx_alpha * np.abs(p1 - p2)
                hi = np.maximum(p1, p2) + cfg.blx_alpha * np.abs(p1 - p2)
                child = lo + rng.random(n_members) * (hi - lo)
            else:
                child = p1.copy()
            mask = rng.random(n_members) < cfg.mutation_prob
            if np.any(mask):
                child[mask] += rng.normal(0.0, cfg.mutation_sigma, int(mask.sum()))
            new_pop[i] = np.clip(child, 0.0, 1.0)
        pop = new_pop
        fitness = _kernels.chi2_population(pop, member_preds, observed)
        gen_best = int(np.argmin(fitness))
        if fitness[gen_best] < best_chi2 - 1e-15:
            best_chi2 = float(fitness[gen_best])
            best_genome = pop[gen_best].copy()
            stall = 0
        else:
            stall += 1
            if stall >= cfg.stall_generations:
                break

    # corner sweep: a single member must never beat the returned ensemble
    corner_chi2 = np.sum((member_preds - observed) ** 2, axis=1)
    j = int(np.argmin(corner_chi2))
    if corner_chi2[j] < best_chi2:
        best_genome = np.zeros(n_members)
        best_genome[j] = 1.0
    return WeightVector.normalized(members, best_genome)


# ---------------------------------------------------------------------------
# point-set assembly

class _PointSet:
    """Member predictions and targets over every observation of a sample set."""

    def __init__(self, members, samples):
        self.members = tuple(PtfId(m) for m in members)
        if not self.members:
            raise InputError("ensemble needs at least one member")
        if len(set(self.members)) != len(self.members):
            raise InputError("duplicate ensemble members")
        self.samples = tuple(samples)
        if not self.samples:
            raise InputError("no samples to calibrate on")

        needed = sorted({f for m in self.members for f in required_inputs(m)})
        for f in needed:
            for s in self.samples:
                if getattr(s, f) is None:
                    raise InputError(
                        f"sample {s.sample_id!r} is missing predictor {f!r} "
                        f"required by the selected members")

        arrays = {f: np.array([getattr(s, f) for s in self.samples], dtype=np.float64)
                  for f in needed}
        psi, theta, owner = [], [], []
        self.sample_points = []
        for i, s in enumerate(self.samples):
            idx = []
            for obs in s.observations:
                idx.append(len(psi))
                psi.append(obs.psi)
                theta.append(obs.theta)
                owner.append(i)
            self.sample_points.append(np.asarray(idx, dtype=np.int64))
        if not psi:
            raise InputError("samples carry no observations")
        self.psi = np.asarray(psi, dtype=np.float64)
        self.observed = np.asarray(theta, dtype=np.float64)
        self.point_owner = np.asarray(owner, dtype=np.int64)

        preds = np.empty((len(self.members), self.psi.size))
        for k, m in enumerate(self.members):
            try:
                batch = predict_batch(m, **arrays)
            except PtfensError as exc:
                raise MemberPredictionError(f"member {m}: {exc}") from exc
            codes = batch.codes[self.point_owner]
            rows = batch.rows[self.point_owner]
            preds[k] = _kernels.theta_points(codes, rows, self.psi)
        self.member_preds = np.ascontiguousarray(preds)

    def restrict_heads(self, heads):
        """Per-sample point indices restricted to a set of pressure heads."""
        keep = np.isin(self.psi, np.asarray(heads, dtype=np.float64))
        return [idx[keep[idx]] for idx in self.sample_points]


def point_matrix(members, samples):
    """(member predictions (m, N), observed (N,), heads (N,)) over all
    observations of the samples, in sample order."""
    points = _PointSet(members, samples)
    return points.member_preds, points.observed, points.psi


@dataclass(frozen=True)
class ReplicaResult:
    index: int
    weights: "WeightVector"
    cal_rmse: float
    val_rmse: float = None  # None when the replica has no out-of-bag points
    n_cal_points: int = 0
    n_val_points: int = 0


@dataclass(frozen=True)
class CalibrationResult:
    members: tuple
    replicas: tuple
    mean_weights: "WeightVector"
    weight_std: tuple
    n_points: int
    seed: tuple = field(default=(0,), compare=False)

    def __post_init__(self):
        if not self.replicas:
            raise InputError("calibration needs at least one replica")
        if abs(sum(self.mean_weights.weights) - 1.0) > 1e-9:
            raise InputError("mean weights must sum to 1")

    @property
    def mean_cal_rmse(self):
        return float(np.mean([r.cal_rmse for r in self.replicas]))

    @property
    def mean_val_rmse(self):
        vals = [r.val_rmse for r in self.replicas if r.val_rmse is not None]
        return float(np.mean(vals)) if vals else None


def _calibrate_points(points, sample_points, n_replicas, ga, seed_path, samples):
    """Bootstrap-calibrate on one point set; used for both global and strata."""
    replicas = bootstrap_split(samples, n_replicas, seed_path)
    id_to_idx = {s.sample_id: i for i, s in enumerate(samples)}
    results = []
    for rep in replicas:
        cal_idx = np.concatenate([sample_points[id_to_idx[sid]]
                                  for sid in rep.calibration_ids])
        if cal_idx.size == 0:
            raise InputError("bootstrap replica drew no observation points")
        rng = np.random.default_rng(seed_path + (rep.index, 1))
        preds_cal = np.ascontiguousarray(points.member_preds[:, cal_idx])
        obs_cal = np.ascontiguousarray(points.observed[cal_idx])
        wv = optimize_weights(preds_cal, obs_cal, ga, rng=rng, members=points.members)

        ens_chi2 = chi2(wv, preds_cal, obs_cal)
        corner = np.min(np.sum((preds_cal - obs_cal) ** 2, axis=1))
        if ens_chi2 > corner + 1e-9 * max(corner, 1.0):
            raise PtfensError("ensemble lost to one of its members on calibration data")
        cal_rmse = float(np.sqrt(ens_chi2 / cal_idx.size))

        val_rmse = None
        val_idx = (np.concatenate([sample_points[id_to_idx[sid]]
                                   for sid in rep.validation_ids])
                   if rep.validation_ids else np.empty(0, dtype=np.int64))
        if val_idx.size:
            val_rmse = float(np.sqrt(chi2(wv, points.member_preds[:, val_idx],
                                          points.observed[val_idx]) / val_idx.size))
        results.append(ReplicaResult(
            index=rep.index, weights=wv, cal_rmse=cal_rmse, val_rmse=val_rmse,
            n_cal_points=int(cal_idx.size), n_val_points=int(val_idx.size)))

    w = np.stack([r.weights.as_array() for r in results])
    mean_w = WeightVector.normalized(points.members, w.mean(axis=0))
    std = w.std(axis=0, ddof=1) if len(results) > 1 else np.zeros(w.shape[1])
    total_points = int(sum(idx.size for idx in sample_points))
    return CalibrationResult(
        members=points.members, replicas=tuple(results), mean_weights=mean_w,
        weight_std=tuple(float(s) for s in std), n_points=total_points,
        seed=seed_path)


def calibrate(members, samples, n_replicas=100, ga=None, seed=0):
    """Bootstrap-calibrate ensemble weights on every observation point."""
    ga = ga or GaConfig()
    points = _PointSet(members, samples)
    return _calibrate_points(points, points.sample_points, n_replicas, ga,
                             _seed_path(seed), points.samples)


@dataclass(frozen=True)
class StratifiedModel:
    """Per-stratum weight vectors with a global fallback."""

    scheme: str
    members: tuple
    strata: dict                 # stratum key -> WeightVector
    fallback: "WeightVector"
    calibrations: dict           # stratum key (and "global") -> CalibrationResult
    below_threshold: tuple       # stratum keys that fell back for lack of points
    min_stratum_points: int
    oc_edges: tuple
    pooled_rmse_stratified: float
    pooled_rmse_global: float

    @property
    def n_params(self):
        return len(self.members) * len(self.strata)


def _stratum_seed(seed_path, key):
    return seed_path + (zlib.crc32(key.encode("utf-8")),)


def calibrate_stratified(members, samples, scheme, n_replicas=100, ga=None,
                         seed=0, min_stratum_points=50, oc_edges=DEFAULT_OC_EDGES):
    """Calibrate one weight vector per stratum plus the global fallback.

    Sample-level schemes (texture, oc, order, temperature) partition samples;
    the pressure scheme calibrates separate vectors on the observations at
    330 and 15000 cm. Strata with fewer points than min_stratum_points are
    not calibrated and use the global weights.
    """
    ga = ga or GaConfig()
    seed_path = _seed_path(seed)
    points = _PointSet(members, samples)
    global_result = _calibrate_points(points, points.sample_points, n_replicas,
                                      ga, seed_path, points.samples)
    fallback = global_result.mean_weights
    calibrations = {GLOBAL_STRATUM: global_result}
    strata = {}
    below = []

    idx_of = {s.sample_id: i for i, s in enumerate(points.samples)}
    if scheme == "pressure":
        plan = []
        for head in (FIELD_CAPACITY_HEAD, WILTING_POINT_HEAD):
            key = stratum_key("psi", f"{head:g}")
            restricted = points.restrict_heads([head])
            subset = [i for i in range(len(points.samples)) if restricted[i].size]
            plan.append((key, subset, [restricted[i] for i in subset]))
    else:
        groups = stratify(points.samples, scheme, oc_edges)
        plan = []
        for key in sorted(k for k in groups if k != "unassigned"):
            subset = [idx_of[s.sample_id] for s in groups[key]]
            plan.append((key, subset, [points.sample_points[i] for i in subset]))

    point_vectors = {}  # stratum key -> flat point indices it covers
    for key, subset, sample_points in plan:
        covered = (np.concatenate(sample_points) if sample_points
                   else np.empty(0, dtype=np.int64))
        n_points = int(covered.size)
        if n_points < min_stratum_points:
            below.append(key)
            continue
        subset_samples = [points.samples[i] for i in subset]
        result = _calibrate_points(points, sample_points, n_replicas, ga,
                                   _stratum_seed(seed_path, key), subset_samples)
        calibrations[key] = result
        strata[key] = result.mean_weights
        point_vectors[key] = covered

    # pooled comparison on the identical full point set
    def pooled_rmse(vector_for):
        ens = np.empty(points.observed.size)
        assigned = np.zeros(points.observed.size, dtype=bool)
        for key, covered in point_vectors.items():
            w = vector_for(key).as_array()
            ens[covered] = w @ points.member_preds[:, covered]
            assigned[covered] = True
        rest = ~assigned
        if np.any(rest):
            ens[rest] = fallback.as_array() @ points.member_preds[:, rest]
        return float(np.sqrt(np.mean((ens - points.observed) ** 2)))

    pooled_strat = pooled_rmse(lambda key: strata[key])
    pooled_glob = pooled_rmse(lambda key: fallback)

    return StratifiedModel(
        scheme=scheme, members=points.members, strata=strata, fallback=fallback,
        calibrations=calibrations, below_threshold=tuple(below),
        min_stratum_points=min_stratum_points, oc_edges=tuple(oc_edges),
        pooled_rmse_stratified=pooled_strat, pooled_rmse_global=pooled_glob)


@dataclass(frozen=True)
class ModelPrediction:
    theta: float
    stratum: str
    used_fallback: bool


def resolve_stratum(model, rec=None, psi=None, stratum=None):
    """Stratum key a record belongs to under a stratified model's scheme."""
    from .dataset import oc_bin  # local import to avoid cycles at module load
    from .texture import classify_texture

    if stratum is not None:
        return stratum if ":" in stratum else stratum_key(
            "psi" if model.scheme == "pressure" else model.scheme, stratum)
    if model.scheme == "texture" and rec is not None:
        if rec.texture_class is not None:
            return stratum_key("texture", rec.texture_class)
        if None not in (rec.sand, rec.silt, rec.clay):
            return stratum_key("texture", classify_texture(rec.sand, rec.silt, rec.clay))
    elif model.scheme == "oc" and rec is not None:
        idx = oc_bin(rec.organic_carbon, model.oc_edges)
        if idx is not None:
            return stratum_key("oc", idx)
    elif model.scheme == "pressure" and psi is not None and np.ndim(psi) == 0:
        if float(psi) in (FIELD_CAPACITY_HEAD, WILTING_POINT_HEAD):
            return stratum_key("psi", f"{float(psi):g}")
    return None  # order/temperature need an explicit stratum


def predict_with_model(model, rec, psi, stratum=None):
    """Ensemble water content under a plain or stratified model.

    For stratified models the stratum is resolved from the record (texture,
    oc), from the head (pressure), or from the explicit stratum argument
    (order, temperature); anything unresolved or uncalibrated uses the
    global fallback weights.
    """
    if isinstance(model, WeightVector):
        theta = ensemble_theta(model, rec, psi)
        return ModelPrediction(theta=theta, stratum=GLOBAL_STRATUM, used_fallback=False)

    key = resolve_stratum(model, rec=rec, psi=psi, stratum=stratum)
    used_fallback = key is None or key not in model.strata
    vector = model.fallback if used_fallback else model.strata[key]
    theta = ensemble_theta(vector, rec, psi)
    return ModelPrediction(theta=theta,
                           stratum=key if key is not None else GLOBAL_STRATUM,
                           used_fallback=used_fallback)


# ---------------------------------------------------------------------------
# weight-table files

def write_weights(path, vector, meta=None):
    """Weight vector as tab-delimited text with # key = value metadata."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(("ptf_id", "weight"))
        for m, w in zip(vector.members, vector.weights):
            writer.writerow((str(m), repr(float(w))))


def read_weights(path):
    meta = {}
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                if value:
                    meta[key.strip()] = value.strip()
                continue
            if line.strip():
                rows.append(line.split("\t"))
    if not rows or rows[0] != ["ptf_id", "weight"]:
        raise InputError(f"{path}: not a weight table")
    members = tuple(r[0] for r in rows[1:])
    weights = tuple(float(r[1]) for r in rows[1:])
    return WeightVector(members=members, weights=weights), meta


def write_replica_table(path, calibrations, meta=None):
    """All replica weight vectors, one row per (stratum, replica)."""
    members = next(iter(calibrations.values())).members
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(("stratum", "replica", "cal_rmse", "val_rmse")
                        + tuple(f"w_{m}" for m in members))
        for key in calibrations:
            result = calibrations[key]
            if result.members != members:
                raise InputError("replica table needs a common member list")
            for rep in result.replicas:
                writer.writerow((
                    key, rep.index, repr(rep.cal_rmse),
                    "" if rep.val_rmse is None else repr(rep.val_rmse),
                ) + tuple(repr(float(w)) for w in rep.weights.weights))


def read_replica_table(path):
    """Parse a replica table into members, per-stratum weight stacks and meta."""
    meta = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line.lstrip("# ").partition("=")
            if value:
                meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line.split("\t"))
    if not body or body[0][:4] != ["stratum", "replica", "cal_rmse", "val_rmse"]:
        raise InputError(f"{path}: not a replica table")
    members = tuple(c[2:] for c in body[0][4:])
    strata = {}
    for row in body[1:]:
        weights = WeightVector.normalized(members, [float(v) for v in row[4:]])
        strata.setdefault(row[0], []).append(ReplicaResult(
            index=int(row[1]), weights=weights, cal_rmse=float(row[2]),
            val_rmse=float(row[3]) if row[3] else None))
    return members, strata, meta
