"""Command line interface.

Subcommands: ingest, evaluate, calibrate, predict, map. Global flags:
--config (key = value file), --seed, --out, --threads. Explicit flags win
over config-file values, which win over defaults. Every run writes a
manifest.json into the output directory recording the settings, the sha256
of each input file, and the sha256 of every shipped coefficient file; the
manifest carries no timestamps so identical runs produce identical bytes.

Exit codes: 0 success, 1 usage or configuration problem, 2 bad input data,
3 internal error.
"""

import argparse
import hashlib
import json
import os
import sys

from . import __version__, _kernels, coeffs, dataset, ensemble, mapping, metrics
from .ensemble import GaConfig, WeightVector
from .errors import ConfigError, DataError
from .ptf import ALL_PTFS, GROUPS, PredictorRecord, PtfId, load_rosetta_weights
from .retention import FIELD_CAPACITY_HEAD, SATURATION_HEAD, WILTING_POINT_HEAD


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def read_config(path):
    """key = value file; # comments and blank lines ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


class _Settings:
    """Flag > config file > default, with casting and an audit trail."""

    def __init__(self, args, config):
        self.args = vars(args)
        self.config = config
        self.used = {}

    def get(self, name, default=None, cast=str):
        value = self.args.get(name)
        if value is None and name in self.config:
            raw = self.config[name]
            try:
                value = cast(raw) if cast is not bool else _parse_bool(raw)
            except ValueError:
                raise ConfigError(f"config key {name!r}: bad value {raw!r}") from None
        if value is None:
            value = default
        self.used[name] = value
        return value


def _parse_bool(raw):
    low = str(raw).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"missing required {what}")
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _select_members(settings):
    members = settings.get("members")
    group = settings.get("group")
    if members and group:
        raise ConfigError("--members and --group are mutually exclusive")
    if group:
        key = group.strip().upper()
        if key not in GROUPS:
            raise ConfigError(f"unknown group {group!r}; choose from {sorted(GROUPS)}")
        return GROUPS[key]
    if members:
        out = []
        for name in members.split(","):
            name = name.strip()
            try:
                out.append(PtfId(name))
            except ValueError:
                valid = ", ".join(p.value for p in ALL_PTFS)
                raise ConfigError(f"unknown PTF {name!r}; valid ids: {valid}") from None
        return tuple(out)
    return ALL_PTFS


def _ga_config(settings, seed):
    return GaConfig(
        population=settings.get("ga_population", 50, int),
        generations=settings.get("ga_generations", 200, int),
        stall_generations=settings.get("ga_stall_generations", 30, int),
        crossover_prob=settings.get("ga_crossover_prob", 0.8, float),
        blx_alpha=settings.get("ga_blx_alpha", 0.5, float),
        mutation_prob=settings.get("ga_mutation_prob", 0.1, float),
        mutation_sigma=settings.get("ga_mutation_sigma", 0.1, float),
        tournament=settings.get("ga_tournament", 3, int),
        elitism=settings.get("ga_elitism", 2, int),
        seed=seed,
    )


def _write_manifest(out_dir, command, settings, input_paths):
    manifest = {
        "package": "ptfens",
        "version": __version__,
        "command": command,
        "settings": {k: (str(v) if isinstance(v, tuple) else v)
                     for k, v in settings.used.items()},
        "input_hashes": {os.path.basename(p): _sha256(p)
                         for p in input_paths if p and os.path.exists(p)},
        "coefficient_files": coeffs.data_file_hashes(),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_rosetta(settings):
    directory = settings.get("rosetta_dir")
    if directory:
        if not os.path.isdir(directory):
            raise ConfigError(f"rosetta weight directory not found: {directory}")
        load_rosetta_weights(directory)


def _psi_list(settings):
    raw = settings.get("psi", "0,330,15000")
    try:
        return [float(p) for p in str(raw).split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --psi list {raw!r}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(settings, out_dir):
    data = _require_file(settings.get("data"), "input data file (--data)")
    schema_path = _require_file(settings.get("schema"), "schema file (--schema)")
    schema = dataset.read_schema(schema_path)
    result = dataset.ingest(data, schema)
    qa = dataset.qa_filter(result.samples)

    dataset.write_samples(os.path.join(out_dir, "samples.csv"), qa.kept)
    dataset.write_removals(os.path.join(out_dir, "removed.csv"),
                           result.removals + qa.removals)
    _write_manifest(out_dir, "ingest", settings, [data, schema_path])
    print(f"rows={result.n_rows} ingested={len(result.samples)} "
          f"kept={len(qa.kept)} removed_ingest={len(result.removals)} "
          f"removed_qa={len(qa.removals)}")
    return 0


def cmd_evaluate(settings, out_dir):
    data = _require_file(settings.get("data"), "input data file (--data)")
    _load_rosetta(settings)
    samples = dataset.read_samples(data)
    if not samples:
        raise DataError(f"{data}: no samples")
    members = _select_members(settings)

    fits = {}
    failures = {}
    for m in members:
        try:
            preds, observed, _ = ensemble.point_matrix([m], samples)
            fits[m] = metrics.FitSummary.from_predictions(preds[0], observed, n_params=1)
        except DataError as exc:
            failures[m] = str(exc)

    if not fits:
        raise DataError("no member was evaluable on this dataset")
    n_points = next(iter(fits.values())).n_points
    context = metrics.SelectionContext.from_j_values(
        [fit.j for fit in fits.values()], n_points)

    rows = []
    for m in members:
        fit = fits.get(m)
        if fit is None:
            rows.append((m.value, None, None, None))
        else:
            rows.append((m.value, fit, metrics.aic(fit, context),
                         metrics.aicc(fit, context)))

    weights_path = settings.get("weights")
    if weights_path:
        _require_file(weights_path, "weight file (--weights)")
        vector, _ = ensemble.read_weights(weights_path)
        preds, observed, _ = ensemble.point_matrix(vector.members, samples)
        ens = vector.as_array() @ preds
        fit = metrics.FitSummary.from_predictions(ens, observed,
                                                  n_params=len(vector.members))
        rows.append(("ensemble", fit, metrics.aic(fit, context),
                     metrics.aicc(fit, context)))

    metrics.write_report(os.path.join(out_dir, "report.tsv"), rows)
    _write_manifest(out_dir, "evaluate", settings,
                    [data] + ([weights_path] if weights_path else []))

    print(f"n_points={n_points} j_star={context.j_star:.6f} "
          f"sigma_hat2={context.sigma_hat2:.6f}")
    for model, fit, aic_value, aicc_value in rows:
        if fit is None:
            print(f"{model:<14} not_evaluable ({failures[PtfId(model)]})")
        else:
            print(f"{model:<14} rmse={fit.rmse:.4f} j={fit.j:.3f} "
                  f"aic={aic_value:.2f} aicc={aicc_value:.2f}")
    return 0


def _stratum_filename(key):
    return "weights_" + key.replace(":", "_").replace("/", "_") + ".tsv"


def cmd_calibrate(settings, out_dir, seed):
    data = _require_file(settings.get("data"), "input data file (--data)")
    _load_rosetta(settings)
    samples = dataset.read_samples(data)
    members = _select_members(settings)
    n_replicas = settings.get("replicas", 100, int)
    scheme = settings.get("scheme", "global")
    ga = _ga_config(settings, seed)
    meta_base = {"members": ",".join(m.value for m in members),
                 "replicas": n_replicas, "seed": seed, "scheme": scheme}

    if scheme == "global":
        result = ensemble.calibrate(members, samples, n_replicas=n_replicas,
                                    ga=ga, seed=seed)
        calibrations = {ensemble.GLOBAL_STRATUM: result}
        ensemble.write_weights(
            os.path.join(out_dir, "weights_global.tsv"), result.mean_weights,
            meta={**meta_base, "stratum": ensemble.GLOBAL_STRATUM,
                  "mean_cal_rmse": result.mean_cal_rmse,
                  "mean_val_rmse": result.mean_val_rmse})
        print(f"stratum=global points={result.n_points} "
              f"cal_rmse={result.mean_cal_rmse:.4f} "
              f"val_rmse={result.mean_val_rmse if result.mean_val_rmse is None else format(result.mean_val_rmse, '.4f')}")
    else:
        if scheme not in dataset.STRATIFICATION_SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}; choose global or one of "
                              f"{dataset.STRATIFICATION_SCHEMES}")
        oc_edges = dataset.DEFAULT_OC_EDGES
        raw_edges = settings.get("oc_edges")
        if raw_edges:
            oc_edges = tuple(float(e) for e in str(raw_edges).split(","))
        model = ensemble.calibrate_stratified(
            members, samples, scheme, n_replicas=n_replicas, ga=ga, seed=seed,
            min_stratum_points=settings.get("min_stratum_points", 50, int),
            oc_edges=oc_edges)
        calibrations = model.calibrations
        ensemble.write_weights(
            os.path.join(out_dir, "weights_global.tsv"), model.fallback,
            meta={**meta_base, "stratum": ensemble.GLOBAL_STRATUM})
        for key, vector in model.strata.items():
            result = model.calibrations[key]
            ensemble.write_weights(
                os.path.join(out_dir, _stratum_filename(key)), vector,
                meta={**meta_base, "stratum": key,
                      "mean_cal_rmse": result.mean_cal_rmse,
                      "mean_val_rmse": result.mean_val_rmse})
        for key in model.below_threshold:
            print(f"stratum={key} below min_stratum_points, uses global fallback")
        print(f"pooled_rmse_stratified={model.pooled_rmse_stratified:.4f} "
              f"pooled_rmse_global={model.pooled_rmse_global:.4f} "
              f"n_params={model.n_params}")

    ensemble.write_replica_table(os.path.join(out_dir, "replicas.tsv"),
                                 calibrations, meta=meta_base)
    with open(os.path.join(out_dir, "summary.tsv"), "w", encoding="utf-8") as fh:
        fh.write("stratum\tptf_id\tmean_weight\tweight_std\n")
        for key, result in calibrations.items():
            for m, w, s in zip(result.members, result.mean_weights.weights,
                               result.weight_std):
                fh.write(f"{key}\t{m.value}\t{w!r}\t{s!r}\n")
    _write_manifest(out_dir, "calibrate", settings, [data])
    return 0


def cmd_predict(settings, out_dir):
    weights_path = _require_file(settings.get("weights"), "weight file (--weights)")
    _load_rosetta(settings)
    vector, _ = ensemble.read_weights(weights_path)
    psi_values = _psi_list(settings)
    topsoil = settings.get("topsoil", True, bool)
    rows = []

    data = settings.get("data")
    if data:
        _require_file(data, "input data file (--data)")
        for s in dataset.read_samples(data):
            rec = PredictorRecord(sand=s.sand, silt=s.silt, clay=s.clay,
                                  bulk_density=s.bulk_density,
                                  organic_carbon=s.organic_carbon, topsoil=topsoil)
            for psi in psi_values:
                theta = ensemble.ensemble_theta(vector, rec, psi)
                rows.append((s.sample_id, psi, theta))
    else:
        rec = PredictorRecord(
            sand=settings.get("sand", None, float),
            silt=settings.get("silt", None, float),
            clay=settings.get("clay", None, float),
            bulk_density=settings.get("bulk_density", None, float),
            organic_carbon=settings.get("organic_carbon", None, float),
            texture_class=settings.get("texture_class"),
            topsoil=topsoil)
        for psi in psi_values:
            theta = ensemble.ensemble_theta(vector, rec, psi)
            rows.append(("record", psi, theta))

    with open(os.path.join(out_dir, "predictions.tsv"), "w", encoding="utf-8") as fh:
        fh.write("sample_id\tpsi\ttheta\n")
        for sid, psi, theta in rows:
            fh.write(f"{sid}\t{psi:g}\t{theta!r}\n")
    _write_manifest(out_dir, "predict", settings,
                    [weights_path] + ([data] if data else []))
    for sid, psi, theta in rows:
        print(f"{sid}\tpsi={psi:g}\ttheta={theta:.6f}")
    return 0


def cmd_map(settings, out_dir, seed):
    table_path = _require_file(settings.get("weights"),
                               "replica weight table (--weights)")
    _load_rosetta(settings)
    members, strata, _ = ensemble.read_replica_table(table_path)
    stratum = settings.get("stratum", ensemble.GLOBAL_STRATUM)
    if stratum not in strata:
        raise DataError(f"{table_path}: no stratum {stratum!r}; "
                        f"available: {', '.join(sorted(strata))}")
    replicas = sorted(strata[stratum], key=lambda r: r.index)
    vectors = [r.weights for r in replicas]

    grids = {}
    paths = {}
    for field, flag in (("sand", "sand_grid"), ("silt", "silt_grid"),
                        ("clay", "clay_grid"), ("bulk_density", "bd_grid"),
                        ("organic_carbon", "oc_grid")):
        path = settings.get(flag)
        if field in ("sand", "silt", "clay"):
            path = _require_file(path, f"--{flag.replace('_', '-')}")
        if path:
            grids[field] = mapping.read_grid(path)
            paths[field] = path
    layers = mapping.SoilLayerStack(
        sand=grids["sand"], silt=grids["silt"], clay=grids["clay"],
        bulk_density=grids.get("bulk_density"),
        organic_carbon=grids.get("organic_carbon"))

    product = mapping.apply_ensemble_map(
        layers, vectors, topsoil=settings.get("topsoil", True, bool),
        block_rows=settings.get("block_rows", 256, int))
    for head in mapping.MAP_HEADS:
        label = mapping.HEAD_LABELS[head]
        mapping.write_grid(os.path.join(out_dir, f"mean_{label}.asc"),
                           product.mean[head])
        mapping.write_grid(os.path.join(out_dir, f"cv_{label}.asc"),
                           product.cv[head])
    _write_manifest(out_dir, "map", settings, [table_path] + list(paths.values()))
    print(f"stratum={stratum} replicas={len(vectors)} "
          f"valid_cells={product.n_valid_cells} "
          f"zero_mean_cv_cells={product.cv_zero_mean_cells}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = _ArgumentParser(prog="ptfens",
                             description="Soil water retention ensembles: point "
                                         "predictors, calibration, and mapping.")
    parser.add_argument("--version", action="version",
                        version=f"ptfens {__version__}")
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--seed", type=int, help="master random seed (default 0)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--threads", type=int, help="cap compute threads")
    common.add_argument("--rosetta-dir",
                        help="directory with rosetta_*.ann network weight files")

    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", parents=[common],
                       help="read, convert and quality-filter retention data")
    p.add_argument("--data", help="delimited source data file")
    p.add_argument("--schema", help="column-mapping schema file")

    p = sub.add_parser("evaluate", parents=[common],
                       help="score predictors against observed retention data")
    p.add_argument("--data", help="canonical sample file from ingest")
    p.add_argument("--members", help="comma-separated PTF ids")
    p.add_argument("--group", help="member preset: A, B, C or D")
    p.add_argument("--weights", help="also score this calibrated weight vector")

    p = sub.add_parser("calibrate", parents=[common],
                       help="bootstrap-calibrate ensemble weights")
    p.add_argument("--data", help="canonical sample file from ingest")
    p.add_argument("--members", help="comma-separated PTF ids")
    p.add_argument("--group", help="member preset: A, B, C or D")
    p.add_argument("--replicas", type=int, help="bootstrap replica count (default 100)")
    p.add_argument("--scheme",
                   help="global (default), texture, oc, order, temperature, pressure")
    p.add_argument("--min-stratum-points", type=int,
                   help="smallest stratum calibrated separately (default 50)")
    p.add_argument("--oc-edges", help="organic-carbon bin edges, percent")

    p = sub.add_parser("predict", parents=[common],
                       help="predict water content with calibrated weights")
    p.add_argument("--weights", help="weight vector file from calibrate")
    p.add_argument("--data", help="canonical sample file for batch prediction")
    p.add_argument("--psi", help="comma-separated suctions in cm (default 0,330,15000)")
    p.add_argument("--sand", type=float)
    p.add_argument("--silt", type=float)
    p.add_argument("--clay", type=float)
    p.add_argument("--bulk-density", type=float)
    p.add_argument("--organic-carbon", type=float)
    p.add_argument("--texture-class")
    p.add_argument("--topsoil", type=int, choices=(0, 1))

    p = sub.add_parser("map", parents=[common],
                       help="apply a calibrated ensemble to gridded soil layers")
    p.add_argument("--weights", help="replica weight table from calibrate")
    p.add_argument("--stratum", help="stratum to map (default global)")
    p.add_argument("--sand-grid")
    p.add_argument("--silt-grid")
    p.add_argument("--clay-grid")
    p.add_argument("--bd-grid")
    p.add_argument("--oc-grid")
    p.add_argument("--block-rows", type=int)
    p.add_argument("--topsoil", type=int, choices=(0, 1))
    return parser


def main(argv=None):
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a subcommand is required")

        config = {}
        if args.config:
            _require_file(args.config, "config file (--config)")
            config = read_config(args.config)
        settings = _Settings(args, config)

        seed = settings.get("seed", 0, int)
        if seed < 0:
            raise ConfigError("--seed must be non-negative")
        out_dir = settings.get("out", ".")
        os.makedirs(out_dir, exist_ok=True)
        threads = settings.get("threads", None, int)
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be at least 1")
            if _kernels.using_numba():
                import numba
                numba.set_num_threads(threads)

        if args.command == "ingest":
            return cmd_ingest(settings, out_dir)
        if args.command == "evaluate":
            return cmd_evaluate(settings, out_dir)
        if args.command == "calibrate":
            return cmd_calibrate(settings, out_dir, seed)
        if args.command == "predict":
            return cmd_predict(settings, out_dir)
        if args.command == "map":
            return cmd_map(settings, out_dir, seed)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help / --version
        code = exc.code
        return 0 if code in (None, 0) else int(code)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        if os.environ.get("PTFENS_DEBUG"):
            raise
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
