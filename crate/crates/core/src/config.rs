//! Scenario presets and strict TOML configuration files.
//!
//! A configuration file is a flat set of keys matching [`SimulationConfig`]
//! plus an optional `preset` key naming the starting point. Keys not listed
//! are rejected.

use crate::driver::{InitialConcentration, SimulationConfig};
use crate::error::{Error, Result};
use crate::kinetics::StimulusConfig;
use crate::levelset::ShapeSpec;
use crate::reaction_diffusion::Model;

/// Preset names with a one-line description.
pub const PRESETS: [(&str, &str); 9] = [
    ("polarization_random", "stationary cell, random initial u, K = 500"),
    ("polarization_stimulus", "stationary cell re-polarized by two graded stimuli"),
    ("trajectory_straight", "moving cell, D_u = 0.1, D_v = 10, chi = 0.2, u* = 0.2"),
    ("trajectory_circular", "moving cell, D_u = 0.5, D_v = 50, chi = 0.1, u* = 0.25"),
    ("diffusion_sweep", "chi = 0.1, u* = 0.4, (D_u, D_v) in {(0.1, 10), (0.3, 30), (0.5, 50)}"),
    ("contractility_sweep", "D_u = 0.4, D_v = 40, chi = 0.1, u* in {0.25, 0.3, 0.4}"),
    ("one_vs_two_species", "straight-trajectory parameters with both models"),
    ("convergence_study", "T = 10 refinement in dt at h = 0.05 and in h at dt = 1.25e-3"),
    ("mass_check", "circular-trajectory parameters to t = 20"),
];

fn stationary_polar() -> SimulationConfig {
    SimulationConfig {
        d_u: 0.3,
        d_v: 30.0,
        k: 500.0,
        c: 0.8,
        mass: 6.0,
        half_width: 2.5,
        h: 0.05,
        dt: 0.001,
        t_final: 2.0,
        stationary: true,
        seed: 1,
        shape: ShapeSpec::Polar {
            center: [0.0, 0.0],
            cos_coeffs: vec![1.0, 0.0, -0.3],
        },
        initial: InitialConcentration::Random { lo: 0.0, hi: 0.8 },
        ..Default::default()
    }
}

fn moving(name: &str, d_u: f64, d_v: f64, chi: f64, u_star: f64, t_final: f64) -> SimulationConfig {
    SimulationConfig {
        name: name.into(),
        d_u,
        d_v,
        chi,
        u_star,
        t_final,
        ..Default::default()
    }
}

/// All runs belonging to a preset, in a fixed order.
pub fn preset_cases(name: &str) -> Result<Vec<SimulationConfig>> {
    let cases = match name {
        "polarization_random" => vec![SimulationConfig {
            name: name.into(),
            ..stationary_polar()
        }],
        "polarization_stimulus" => vec![SimulationConfig {
            name: name.into(),
            t_final: 20.0,
            initial: InitialConcentration::Uniform { u: 0.5 },
            stimulus: StimulusConfig {
                enabled: true,
                ..Default::default()
            },
            ..stationary_polar()
        }],
        "trajectory_straight" => vec![moving(name, 0.1, 10.0, 0.2, 0.2, 40.0)],
        "trajectory_circular" => vec![moving(name, 0.5, 50.0, 0.1, 0.25, 60.0)],
        "mass_check" => vec![moving(name, 0.5, 50.0, 0.1, 0.25, 20.0)],
        "diffusion_sweep" => [(0.1, 10.0), (0.3, 30.0), (0.5, 50.0)]
            .iter()
            .enumerate()
            .map(|(k, &(du, dv))| moving(&format!("{name}_case{}", k + 1), du, dv, 0.1, 0.4, 60.0))
            .collect(),
        "contractility_sweep" => [0.25, 0.3, 0.4]
            .iter()
            .map(|&us| moving(&format!("{name}_ustar{us}"), 0.4, 40.0, 0.1, us, 60.0))
            .collect(),
        "one_vs_two_species" => {
            let two = moving(&format!("{name}_two"), 0.1, 10.0, 0.2, 0.2, 40.0);
            let one = SimulationConfig {
                name: format!("{name}_one"),
                model: Model::OneSpecies,
                ..two.clone()
            };
            vec![two, one]
        }
        "convergence_study" => {
            let base = moving(name, 0.1, 10.0, 0.2, 0.2, 10.0);
            let mut out = Vec::new();
            for dt in [5e-3, 2.5e-3, 1.25e-3] {
                out.push(SimulationConfig {
                    name: format!("{name}_h0.05_dt{dt}"),
                    h: 0.05,
                    dt,
                    ..base.clone()
                });
            }
            for h in [0.1, 0.025] {
                out.push(SimulationConfig {
                    name: format!("{name}_h{h}_dt0.00125"),
                    h,
                    dt: 1.25e-3,
                    ..base.clone()
                });
            }
            out
        }
        _ => {
            return Err(Error::Validation(vec![format!(
                "unknown preset {name:?}; expected one of {}",
                PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
            )]))
        }
    };
    Ok(cases)
}

/// First (or only) run of a preset.
pub fn preset(name: &str) -> Result<SimulationConfig> {
    Ok(preset_cases(name)?.remove(0))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    Error::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        key: None,
        message: e.message().to_string(),
    }
}

/// Apply the keys of `text` on top of every case of its preset (or of the
/// default configuration when no preset is named).
pub fn parse_config_cases(text: &str) -> Result<Vec<SimulationConfig>> {
    let mut table: toml::Table = text.parse().map_err(|e| parse_error(text, e))?;
    let bases = match table.remove("preset") {
        Some(toml::Value::String(name)) => preset_cases(&name)?,
        Some(other) => {
            return Err(Error::Parse {
                line: key_line(text, "preset"),
                key: Some("preset".into()),
                message: format!("expected a string, found {}", other.type_str()),
            })
        }
        None => vec![SimulationConfig::default()],
    };
    bases.iter().map(|b| merge(b, &table, text)).collect()
}

fn merge(base: &SimulationConfig, table: &toml::Table, text: &str) -> Result<SimulationConfig> {
    let mut merged = match toml::Value::try_from(base).map_err(|e| Error::Format(e.to_string()))? {
        toml::Value::Table(t) => t,
        _ => unreachable!("configuration serializes to a table"),
    };
    for (key, value) in table {
        let Some(slot) = merged.get_mut(key) else {
            return Err(Error::Parse {
                line: key_line(text, key),
                key: Some(key.clone()),
                message: format!("unknown key `{key}`"),
            });
        };
        match (slot, value) {
            (toml::Value::Table(old), toml::Value::Table(new)) if !new.contains_key("kind") => {
                for (k, v) in new {
                    old.insert(k.clone(), v.clone());
                }
            }
            (slot, value) => *slot = value.clone(),
        }
    }
    let cfg: SimulationConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
        let key = table.keys().find(|k| e.message().contains(k.as_str())).cloned();
        Error::Parse {
            line: key.as_deref().and_then(|k| key_line(text, k)),
            key,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Apply the keys of `text` on top of `base`. A `preset` key is not allowed.
pub fn with_overrides(base: &SimulationConfig, text: &str) -> Result<SimulationConfig> {
    let table: toml::Table = text.parse().map_err(|e| parse_error(text, e))?;
    if table.contains_key("preset") {
        return Err(Error::Parse {
            line: key_line(text, "preset"),
            key: Some("preset".into()),
            message: "`preset` cannot be applied on top of an existing configuration".into(),
        });
    }
    merge(base, &table, text)
}

/// Single-run form of [`parse_config_cases`].
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    Ok(parse_config_cases(text)?.remove(0))
}

/// Fully resolved configuration as TOML; parses back to the same value.
pub fn to_toml(cfg: &SimulationConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Format(e.to_string()))
}
