"""Config file ingestion: YAML schema, overrides, hashing.

The schema is versioned; see the shipped ``data/default_config.yaml`` for a
commented reference of every field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources

import yaml

from .controllers import SchemeConfig
from .errors import ConfigurationError
from .propagation import ClassParams, PathlossModel, free_space_reference_loss_db
from .scenario import (INDOOR, OUTDOOR, BsConfig, PlacementCounts, Rect, Scenario)
from .simcore import CampaignConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimConfig:
    """Parsed configuration plus the raw mapping it came from."""

    raw: dict
    scenario: Scenario
    pathloss: PathlossModel
    scheme: SchemeConfig
    counts: PlacementCounts
    iterations: int
    horizon_ms: int
    seed: int
    indoor_enabled: bool
    icic_enabled: bool
    fading_mode: str
    noise_figure_db: float
    sweep_gammas_db: tuple[float, ...]
    sweep_degradation_target: float
    compare_schemes: tuple[str, ...]
    compare_gamma_db: dict[str, float]

    def campaign(self, **overrides) -> CampaignConfig:
        base = CampaignConfig(
            scenario=self.scenario,
            scheme=self.scheme,
            counts=self.counts,
            iterations=self.iterations,
            horizon_ms=self.horizon_ms,
            seed=self.seed,
            indoor_enabled=self.indoor_enabled,
            icic_enabled=self.icic_enabled,
            fading_mode=self.fading_mode,
            noise_figure_db=self.noise_figure_db,
            pathloss=self.pathloss,
        )
        return replace(base, **overrides) if overrides else base

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode()
        ).hexdigest()[:16]


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigurationError(f"{context}: missing required field '{key}'")
    return mapping[key]


def _parse_bs(rec: dict, network: str, context: str) -> BsConfig:
    pos = _require(rec, "position", context)
    if len(pos) != 3:
        raise ConfigurationError(f"{context}: position must be [x, y, z]")
    return BsConfig(
        id=int(_require(rec, "id", context)),
        position=tuple(float(v) for v in pos),
        max_power_dbm=float(rec.get("max_power_dbm", 21.0)),
        antenna_gain_dbi=float(rec.get("antenna_gain_dbi", 0.0)),
        network=network,
    )


def _parse_scenario(section: dict) -> Scenario:
    ctx = "scenario"
    region = _require(section, "outdoor_region", ctx)
    return Scenario(
        area_width_m=float(_require(section, "area_width_m", ctx)),
        area_height_m=float(_require(section, "area_height_m", ctx)),
        building=tuple(tuple(float(c) for c in v) for v in _require(section, "building", ctx)),
        outdoor_bs=tuple(_parse_bs(r, OUTDOOR, f"{ctx}.outdoor_bs") for r in
                         _require(section, "outdoor_bs", ctx)),
        indoor_bs=tuple(_parse_bs(r, INDOOR, f"{ctx}.indoor_bs") for r in
                        _require(section, "indoor_bs", ctx)),
        outdoor_region=Rect(float(region["x_min"]), float(region["y_min"]),
                            float(region["x_max"]), float(region["y_max"])),
        carrier_hz=float(section.get("carrier_hz", 3.5e9)),
        bandwidth_hz=float(section.get("bandwidth_hz", 20e6)),
        n_rb=int(section.get("n_rb", 108)),
        ue_height_m=float(section.get("ue_height_m", 1.5)),
    )


def _parse_pathloss(section: dict, scenario: Scenario) -> PathlossModel:
    ref_default = free_space_reference_loss_db(scenario.carrier_hz)

    def params(name: str, default_exp: float, default_wall: float = 0.0) -> ClassParams:
        rec = section.get(name, {})
        return ClassParams(
            reference_loss_db=float(rec.get("reference_loss_db", ref_default)),
            exponent=float(rec.get("exponent", default_exp)),
            wall_loss_db=float(rec.get("wall_loss_db", default_wall)),
        )

    return PathlossModel(
        outdoor_to_outdoor=params("outdoor_to_outdoor", 3.0),
        indoor_to_indoor=params("indoor_to_indoor", 3.5),
        cross_wall=params("cross_wall", 3.0, 10.0),
        building=scenario.polygon,
    )


def _parse_scheme(section: dict) -> SchemeConfig:
    cbrs = section.get("cbrs", {})
    return SchemeConfig(
        scheme=str(section.get("name", "dynamic")),
        gamma_db=float(section.get("gamma_db", -3.0)),
        psi_percent=float(section.get("psi_percent", 90.0)),
        goal=str(section.get("goal", "sum_power")),
        update_period_ms=int(section.get("update_period_ms", 10)),
        rem_delay_ms=int(section.get("rem_delay_ms", 1)),
        report_period_ms=int(section.get("report_period_ms", 1)),
        quantizer_mode=str(section.get("quantizer", "none")),
        location_error_m=float(section.get("location_error_m", 0.0)),
        belt_spacing_m=float(section.get("belt_spacing_m", 1.0)),
        belt_offset_m=float(section.get("belt_offset_m", 0.5)),
        cbrs_pal_threshold_dbm_per_10mhz=float(cbrs.get("pal_threshold_dbm_per_10mhz", -96.0)),
        cbrs_interference_limit_dbm_per_10mhz=float(
            cbrs.get("interference_limit_dbm_per_10mhz", -80.0)),
        cbrs_grid_spacing_m=float(cbrs.get("grid_spacing_m", 5.0)),
    )


def parse_config(raw: dict) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    scenario = _parse_scenario(_require(raw, "scenario", "config"))
    pathloss = _parse_pathloss(raw.get("pathloss", {}), scenario)
    scheme = _parse_scheme(raw.get("scheme", {}))
    users = raw.get("users", {})
    counts = PlacementCounts(
        indoor_uniform=int(users.get("indoor_uniform", 25)),
        indoor_cluster=int(users.get("indoor_cluster", 10)),
        outdoor=int(users.get("outdoor", 15)),
        cluster_radius_m=float(users.get("cluster_radius_m", 3.0)),
        cluster_bs_id=users.get("cluster_bs_id"),
    )
    campaign = raw.get("campaign", {})
    sweep = raw.get("sweep", {})
    compare = raw.get("compare", {})
    return SimConfig(
        raw=raw,
        scenario=scenario,
        pathloss=pathloss,
        scheme=scheme,
        counts=counts,
        iterations=int(campaign.get("iterations", 200)),
        horizon_ms=int(campaign.get("horizon_ms", 1000)),
        seed=int(campaign.get("seed", 1)),
        indoor_enabled=bool(campaign.get("indoor_enabled", True)),
        icic_enabled=bool(campaign.get("icic", True)),
        fading_mode=str(campaign.get("fading", "rayleigh")),
        noise_figure_db=float(users.get("noise_figure_db", 9.0)),
        sweep_gammas_db=tuple(float(g) for g in sweep.get(
            "gammas_db", (-50, -40, -30, -20, -10, -3, 0))),
        sweep_degradation_target=float(sweep.get("degradation_target", 0.10)),
        compare_schemes=tuple(compare.get(
            "schemes", ("modified_lsa", "cbrs", "semi_static", "semi_static_area", "dynamic"))),
        compare_gamma_db={str(k): float(v) for k, v in (compare.get("gamma_db") or {}).items()},
    )


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values parse as YAML scalars."""
    out = json.loads(json.dumps(raw))  # deep copy of plain data
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        path, value = item.split("=", 1)
        keys = path.strip().split(".")
        node = out
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigurationError(f"override path {path!r} not found in config")
            node = node[k]
        if not isinstance(node, dict):
            raise ConfigurationError(f"override path {path!r} not found in config")
        # the leaf may be absent in the file (fields with defaults)
        node[keys[-1]] = yaml.safe_load(value)
    return out


def load_config(path, overrides=None) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return parse_config(apply_overrides(raw, overrides))


def load_default_config(overrides=None) -> SimConfig:
    ref = resources.files("remshare.data").joinpath("default_config.yaml")
    raw = yaml.safe_load(ref.read_text(encoding="utf-8"))
    return parse_config(apply_overrides(raw, overrides))
