"""The thirteen point predictors of retention-curve parameters.

Four input tiers, by what each predictor consumes:

    A (texture class):            cosby0, carsel, clapp, rosetta_h1w
    B (sand/silt/clay):           cosby1, cosby2, rosetta_h2w
    C (B + bulk density):         rawls, campbell, rosetta_h3w
    D (C + organic carbon):       wosten, weynants, vereecken

All prediction is batch-first over arrays; the scalar entry points wrap a
batch of one. Out-of-domain outputs are clamped into the valid parameter
domain and flagged rather than rejected, so downstream ensembles always get
an evaluable curve. Predictors that take a variable inside ln() or 1/x floor
it at a small positive value (0.01 in the variable's own unit) and flag the
row as input_floored.

rosetta_h2w and rosetta_h3w are trained networks and need a weight file
registered before use (see register_ann / load_rosetta_weights).
rosetta_h1w uses a published class-average table unless a network is
registered for it.
"""

import os
from dataclasses import dataclass
from enum import Enum
from functools import cache

import numpy as np

from . import coeffs
from .ann import ann_forward, read_ann_file
from .errors import DataError, InputError, MemberPredictionError, TableLookupError
from .retention import (
    FAMILY_CODES,
    BrooksCoreyParams,
    CampbellParams,
    VanGenuchtenParams,
    theta_at,
)
from .texture import USDA_CLASSES, classify_texture_array

PARTICLE_DENSITY = 2.65  # g/cm3, standard mineral soil assumption
_FLOOR = 0.01  # lower bound for variables used inside ln() or 1/x


class PtfId(str, Enum):
    COSBY0 = "cosby0"
    CARSEL = "carsel"
    CLAPP = "clapp"
    ROSETTA_H1W = "rosetta_h1w"
    COSBY1 = "cosby1"
    COSBY2 = "cosby2"
    ROSETTA_H2W = "rosetta_h2w"
    RAWLS = "rawls"
    CAMPBELL = "campbell"
    ROSETTA_H3W = "rosetta_h3w"
    WOSTEN = "wosten"
    WEYNANTS = "weynants"
    VEREECKEN = "vereecken"

    def __str__(self):
        return self.value


ALL_PTFS = tuple(PtfId)

GROUPS = {
    "A": (PtfId.COSBY0, PtfId.CARSEL, PtfId.CLAPP, PtfId.ROSETTA_H1W),
    "B": (PtfId.COSBY1, PtfId.COSBY2, PtfId.ROSETTA_H2W),
    "C": (PtfId.RAWLS, PtfId.CAMPBELL, PtfId.ROSETTA_H3W),
    "D": (PtfId.WOSTEN, PtfId.WEYNANTS, PtfId.VEREECKEN),
}

FAMILY = {
    PtfId.COSBY0: "cmp",
    PtfId.CARSEL: "vg",
    PtfId.CLAPP: "cmp",
    PtfId.ROSETTA_H1W: "vg",
    PtfId.COSBY1: "cmp",
    PtfId.COSBY2: "cmp",
    PtfId.ROSETTA_H2W: "vg",
    PtfId.RAWLS: "bc",
    PtfId.CAMPBELL: "cmp",
    PtfId.ROSETTA_H3W: "vg",
    PtfId.WOSTEN: "vg",
    PtfId.WEYNANTS: "vg",
    PtfId.VEREECKEN: "vg",
}

_CLASS_TABLES = {
    PtfId.COSBY0: "cosby_1984_classes.csv",
    PtfId.CARSEL: "carsel_parrish_1988_classes.csv",
    PtfId.CLAPP: "clapp_hornberger_1978_classes.csv",
    PtfId.ROSETTA_H1W: "rosetta_h1w_classes.csv",
}


def group_of(ptf):
    for name, members in GROUPS.items():
        if ptf in members:
            return name
    raise InputError(f"unknown PTF {ptf!r}")


def required_inputs(ptf):
    """Canonical predictor fields a PTF needs. Group A accepts an explicit
    texture class in place of the three fractions."""
    ptf = PtfId(ptf)
    base = ("sand", "silt", "clay")
    group = group_of(ptf)
    if group in ("A", "B"):
        return base
    if group == "C":
        return base + ("bulk_density",)
    return base + ("bulk_density", "organic_carbon")


@dataclass(frozen=True)
class PredictorRecord:
    """One profile's predictors. Unknown fields stay None."""

    sand: float = None
    silt: float = None
    clay: float = None
    bulk_density: float = None
    organic_carbon: float = None
    texture_class: str = None
    topsoil: bool = True


@dataclass(frozen=True)
class ParamBatch:
    """Packed retention parameters for one PTF over a batch of records."""

    ptf: PtfId
    codes: np.ndarray  # int8 family code per row, for the point kernels
    rows: np.ndarray   # (n, 4) packed parameter rows
    flags: dict        # flag name -> boolean mask over rows

    def __len__(self):
        return self.rows.shape[0]


def lookup_class_params(ptf, texture_class):
    """Published class-average parameters for a group A predictor."""
    ptf = PtfId(ptf)
    if ptf not in _CLASS_TABLES:
        raise InputError(f"{ptf} is not a class-lookup PTF")
    table = coeffs.load_class_table(_CLASS_TABLES[ptf], ptf.value)
    return table.lookup(texture_class)


@cache
def _class_rows(ptf):
    """Class table as a (12, 4) packed array indexed by USDA class code."""
    table = coeffs.load_class_table(_CLASS_TABLES[ptf], ptf.value)
    rows = np.full((len(USDA_CLASSES), 4), np.nan)
    for i, cls in enumerate(USDA_CLASSES):
        if cls in table.entries:
            rows[i] = table.entries[cls].packed()
    return rows


# ---------------------------------------------------------------------------
# clamping into the valid parameter domain

def _clamp_vg(theta_r, theta_s, alpha, n, flags):
    ts = np.clip(theta_s, 1e-6, 1.0)
    flags["theta_s_clamped"] = ts != theta_s
    tr = np.clip(theta_r, 0.0, None)
    tr = np.minimum(tr, np.maximum(ts - 1e-6, 0.0))
    flags["theta_r_clamped"] = tr != theta_r
    al = np.maximum(alpha, 1e-8)
    flags["alpha_clamped"] = al != alpha
    nn = np.maximum(n, 1.0 + 1e-6)
    flags["n_clamped"] = nn != n
    return np.stack([tr, ts, al, nn], axis=1)


def _clamp_bc(theta_r, theta_s, psi_b, lambda_, flags):
    ts = np.clip(theta_s, 1e-6, 1.0)
    flags["theta_s_clamped"] = ts != theta_s
    tr = np.clip(theta_r, 0.0, None)
    tr = np.minimum(tr, np.maximum(ts - 1e-6, 0.0))
    flags["theta_r_clamped"] = tr != theta_r
    pb = np.maximum(psi_b, 1e-6)
    flags["psi_b_clamped"] = pb != psi_b
    lm = np.maximum(lambda_, 1e-6)
    flags["lambda_clamped"] = lm != lambda_
    return np.stack([tr, ts, pb, lm], axis=1)


def _clamp_cmp(theta_s, psi_e, b, flags):
    ts = np.clip(theta_s, 1e-6, 1.0)
    flags["theta_s_clamped"] = ts != theta_s
    pe = np.maximum(psi_e, 1e-6)
    flags["psi_e_clamped"] = pe != psi_e
    bb = np.maximum(b, 1e-6)
    flags["b_clamped"] = bb != b
    return np.stack([ts, pe, bb, np.zeros_like(ts)], axis=1)


def _floored(values, flags):
    v = np.maximum(values, _FLOOR)
    mask = v != values
    if "input_floored" in flags:
        flags["input_floored"] = flags["input_floored"] | mask
    else:
        flags["input_floored"] = mask
    return v


# ---------------------------------------------------------------------------
# per-PTF batch implementations

def _batch_class(ptf, texture, flags):
    rows = _class_rows(ptf)[texture]
    if np.any(~np.isfinite(rows)):
        bad = np.unique(np.asarray(texture)[~np.isfinite(rows).all(axis=1)])
        names = ", ".join(USDA_CLASSES[i] for i in bad)
        raise TableLookupError(f"PTF {ptf} has no entry for texture class(es): {names}")
    return rows


def _batch_cosby_regression(name, sand, silt, clay, flags):
    variables = {"sand": sand, "clay": clay}
    if silt is not None:
        variables["silt"] = silt
    out = coeffs.eval_regression(coeffs.load_regression(name), variables)
    return _clamp_cmp(out["theta_s"], out["psi_e"], out["b"], flags)


def _batch_rawls(sand, clay, bd, flags):
    phi = 1.0 - bd / PARTICLE_DENSITY
    phi = _floored(phi, flags)
    out = coeffs.eval_regression(
        coeffs.load_regression("rawls_brakensiek_1985.csv"),
        {"sand": sand, "clay": clay, "phi": phi},
    )
    return _clamp_bc(out["theta_r"], phi, out["psi_b"], out["lambda"], flags)


def _batch_campbell(sand, silt, clay, bd, flags):
    c = coeffs.load_constants("campbell_shiozawa_1992.csv")
    total = sand + silt + clay
    f_sand, f_silt, f_clay = sand / total, silt / total, clay / total
    ln_d = np.log([c["d_sand_mm"], c["d_silt_mm"], c["d_clay_mm"]])
    ln_dg = f_sand * ln_d[0] + f_silt * ln_d[1] + f_clay * ln_d[2]
    var = f_sand * ln_d[0] ** 2 + f_silt * ln_d[1] ** 2 + f_clay * ln_d[2] ** 2 - ln_dg ** 2
    sigma_g = np.exp(np.sqrt(np.maximum(var, 0.0)))
    dg = np.exp(ln_dg)
    inv_sqrt_dg = dg ** -0.5
    b = inv_sqrt_dg + c["b_sigma_coeff"] * sigma_g
    psi_es_kpa = c["air_entry_coeff_kpa"] * inv_sqrt_dg
    psi_e_kpa = psi_es_kpa * (bd / c["reference_bd"]) ** (c["bd_exponent_coeff"] * b)
    psi_e = psi_e_kpa * c["kpa_to_cm"]
    theta_s = 1.0 - bd / c["particle_density"]
    return _clamp_cmp(theta_s, psi_e, b, flags)


def _batch_wosten(silt, clay, bd, oc, topsoil, flags):
    om = _floored(1.724 * oc, flags)
    silt = _floored(silt, flags)
    clay = _floored(clay, flags)
    bd = _floored(bd, flags)
    out = coeffs.eval_regression(
        coeffs.load_regression("wosten_1999.csv"),
        {"silt": silt, "clay": clay, "om": om, "bd": bd, "topsoil": topsoil},
    )
    return _clamp_vg(out["theta_r"], out["theta_s"], out["alpha"], out["n"], flags)


def _batch_weynants(sand, clay, bd, oc, flags):
    oc = _floored(oc, flags)
    out = coeffs.eval_regression(
        coeffs.load_regression("weynants_2009.csv"),
        {"sand": sand, "clay": clay, "bd": bd, "oc": oc},
    )
    return _clamp_vg(out["theta_r"], out["theta_s"], out["alpha"], out["n"], flags)


def _batch_vereecken(sand, clay, bd, oc, flags):
    out = coeffs.eval_regression(
        coeffs.load_regression("vereecken_1989.csv"),
        {"sand": sand, "clay": clay, "bd": bd, "oc": oc},
    )
    return _clamp_vg(out["theta_r"], out["theta_s"], out["alpha"], out["n"], flags)


# ---------------------------------------------------------------------------
# trained-network registry

_ANN_INPUTS = {"sand", "silt", "clay", "bd", "oc"}
_ann_registry = {}


def register_ann(ptf, spec):
    """Attach a trained network to one of the rosetta predictor slots."""
    ptf = PtfId(ptf)
    if ptf not in (PtfId.ROSETTA_H1W, PtfId.ROSETTA_H2W, PtfId.ROSETTA_H3W):
        raise InputError(f"{ptf} does not accept a trained network")
    if tuple(spec.output_names) != ("theta_r", "theta_s", "alpha", "n"):
        raise DataError(
            f"network for {ptf} must output theta_r theta_s alpha n, "
            f"got {' '.join(spec.output_names)}"
        )
    unknown = set(spec.input_names) - _ANN_INPUTS
    if unknown:
        raise DataError(f"network for {ptf} uses unknown inputs {sorted(unknown)}")
    _ann_registry[ptf] = spec


def registered_ann(ptf):
    return _ann_registry.get(PtfId(ptf))


def clear_ann_registry():
    _ann_registry.clear()


def load_rosetta_weights(directory):
    """Register every rosetta_*.ann weight file found in a directory."""
    loaded = []
    for ptf in (PtfId.ROSETTA_H1W, PtfId.ROSETTA_H2W, PtfId.ROSETTA_H3W):
        path = os.path.join(directory, f"{ptf.value}.ann")
        if os.path.exists(path):
            register_ann(ptf, read_ann_file(path))
            loaded.append(ptf)
    if not loaded:
        raise DataError(f"no rosetta_*.ann weight files found in {directory!r}")
    return loaded


def _batch_ann(ptf, spec, arrays, flags):
    cols = []
    for name in spec.input_names:
        arr = arrays.get(name)
        if arr is None:
            raise InputError(f"network for {ptf} needs predictor {name!r}")
        cols.append(arr)
    out = ann_forward(spec, np.stack(cols, axis=1))
    return _clamp_vg(out[:, 0], out[:, 1], out[:, 2], out[:, 3], flags)


# ---------------------------------------------------------------------------
# public prediction API

def _as_float_array(name, values, n):
    if values is None:
        raise InputError(f"missing required predictor {name!r}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise InputError(f"predictor {name!r} has shape {arr.shape}, expected ({n},)")
    return arr


def predict_batch(ptf, sand=None, silt=None, clay=None, bulk_density=None,
                  organic_carbon=None, texture=None, topsoil=None):
    """Predict packed retention parameters for arrays of predictors.

    texture takes precomputed USDA class codes; when omitted, class-lookup
    PTFs classify from sand/silt/clay. topsoil defaults to all-true.
    """
    ptf = PtfId(ptf)
    for probe in (sand, silt, clay, texture):
        if probe is not None:
            n = len(np.atleast_1d(probe))
            break
    else:
        raise InputError("missing required predictor 'sand'")

    flags = {}
    if ptf in _CLASS_TABLES and registered_ann(ptf) is None:
        if texture is None:
            sand = _as_float_array("sand", sand, n)
            silt = _as_float_array("silt", silt, n)
            clay = _as_float_array("clay", clay, n)
            texture = classify_texture_array(sand, silt, clay)
        else:
            texture = np.asarray(texture, dtype=np.int64)
        rows = _batch_class(ptf, texture, flags)
    else:
        sand = _as_float_array("sand", sand, n)
        silt = _as_float_array("silt", silt, n)
        clay = _as_float_array("clay", clay, n)
        need = required_inputs(ptf)
        if "bulk_density" in need:
            bulk_density = _as_float_array("bulk_density", bulk_density, n)
        if "organic_carbon" in need:
            organic_carbon = _as_float_array("organic_carbon", organic_carbon, n)
        spec = registered_ann(ptf)
        if spec is not None:
            arrays = {"sand": sand, "silt": silt, "clay": clay,
                      "bd": bulk_density, "oc": organic_carbon}
            rows = _batch_ann(ptf, spec, arrays, flags)
        elif ptf == PtfId.COSBY1:
            rows = _batch_cosby_regression("cosby_1984_univariate.csv", sand, None, clay, flags)
        elif ptf == PtfId.COSBY2:
            rows = _batch_cosby_regression("cosby_1984_bivariate.csv", sand, silt, clay, flags)
        elif ptf in (PtfId.ROSETTA_H2W, PtfId.ROSETTA_H3W):
            raise DataError(
                f"{ptf} needs a trained network; register one with register_ann() "
                "or load_rosetta_weights()"
            )
        elif ptf == PtfId.RAWLS:
            rows = _batch_rawls(sand, clay, bulk_density, flags)
        elif ptf == PtfId.CAMPBELL:
            rows = _batch_campbell(sand, silt, clay, bulk_density, flags)
        elif ptf == PtfId.WOSTEN:
            if topsoil is None:
                top = np.ones(n, dtype=np.float64)
            else:
                top = np.asarray(topsoil, dtype=np.float64)
            rows = _batch_wosten(silt, clay, bulk_density, organic_carbon, top, flags)
        elif ptf == PtfId.WEYNANTS:
            rows = _batch_weynants(sand, clay, bulk_density, organic_carbon, flags)
        elif ptf == PtfId.VEREECKEN:
            rows = _batch_vereecken(sand, clay, bulk_density, organic_carbon, flags)
        else:
            raise InputError(f"unhandled PTF {ptf!r}")

    if not np.all(np.isfinite(rows)):
        bad = int(np.flatnonzero(~np.isfinite(rows).all(axis=1))[0])
        raise MemberPredictionError(f"{ptf} produced non-finite parameters at row {bad}")
    codes = np.full(n, FAMILY_CODES[FAMILY[ptf]], dtype=np.int8)
    return ParamBatch(ptf=ptf, codes=codes, rows=rows, flags=flags)


def _record_arrays(ptf, rec):
    """Length-1 predictor arrays from a record, with named-field errors."""
    ptf = PtfId(ptf)
    kwargs = {}
    class_lookup = ptf in _CLASS_TABLES and registered_ann(ptf) is None
    if class_lookup and rec.texture_class is not None:
        if rec.texture_class not in USDA_CLASSES:
            raise InputError(f"unknown texture class {rec.texture_class!r}")
        kwargs["texture"] = np.array([USDA_CLASSES.index(rec.texture_class)])
        return kwargs
    for name in required_inputs(ptf):
        value = getattr(rec, name)
        if value is None:
            raise InputError(f"missing required predictor {name!r}")
        kwargs[name] = np.array([float(value)])
    kwargs["topsoil"] = np.array([1.0 if rec.topsoil else 0.0])
    return kwargs


def params_from_row(family, row, flags=()):
    """Rehydrate a packed parameter row into its dataclass."""
    if family == "vg":
        return VanGenuchtenParams(row[0], row[1], row[2], row[3], flags=flags)
    if family == "bc":
        return BrooksCoreyParams(row[0], row[1], row[2], row[3], flags=flags)
    if family == "cmp":
        return CampbellParams(row[0], row[1], row[2], flags=flags)
    raise InputError(f"unknown parameter family {family!r}")


def predict(ptf, rec):
    """Predict retention parameters for a single record."""
    ptf = PtfId(ptf)
    batch = predict_batch(ptf, **_record_arrays(ptf, rec))
    flags = tuple(sorted(name for name, mask in batch.flags.items() if mask[0]))
    return params_from_row(FAMILY[ptf], batch.rows[0], flags=flags)


def predict_theta(ptf, rec, psi):
    """Predict water content directly at one or more pressure heads."""
    return theta_at(predict(ptf, rec), psi)
