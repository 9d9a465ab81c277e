//! Manipulator geometry.
//!
//! The base frame is centred at `A1 = (0, 0)` with the x-axis through
//! `A2 = (a2x, 0)`; `A3 = (a3x, a3y)`. The platform triangle has edges
//! `d1 = |B1B2|`, `d2 = |B2B3|` and `d3 = |B1B3|`. The platform angle
//! `beta` is the interior angle at `B1`, measured counterclockwise from
//! `B1B2` to `B1B3`, so `B3` lies to the left of the directed edge `B1B2`.
//! The mirrored platform (negative `beta`) is not represented.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on the arccos argument before a platform is declared degenerate.
pub const ARCCOS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManipulatorGeometry {
    a2x: f64,
    a3x: f64,
    a3y: f64,
    d1: f64,
    d2: f64,
    d3: f64,
    beta: f64,
    degenerate: bool,
}

impl ManipulatorGeometry {
    /// Validates the raw parameters and derives `beta`.
    ///
    /// Edges that satisfy the triangle inequality only with equality are
    /// accepted; the geometry is then flagged degenerate and `beta` is 0 or π.
    pub fn new(a2x: f64, a3x: f64, a3y: f64, d1: f64, d2: f64, d3: f64) -> Result<Self> {
        for (name, v) in [
            ("a2x", a2x),
            ("a3x", a3x),
            ("a3y", a3y),
            ("d1", d1),
            ("d2", d2),
            ("d3", d3),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        for (field, value) in [("d1", d1), ("d2", d2), ("d3", d3)] {
            if value <= 0.0 {
                return Err(Error::NonPositiveEdge { field, value });
            }
        }
        if a2x <= 0.0 {
            return Err(Error::NonPositiveBase(a2x));
        }
        if d1 > d2 + d3 || d2 > d1 + d3 || d3 > d1 + d2 {
            return Err(Error::TriangleInequality { d1, d2, d3 });
        }
        let degenerate = d1 == d2 + d3 || d2 == d1 + d3 || d3 == d1 + d2;
        let beta = platform_angle(d1, d2, d3)?;
        Ok(Self {
            a2x,
            a3x,
            a3y,
            d1,
            d2,
            d3,
            beta,
            degenerate,
        })
    }

    /// The manipulator used throughout the literature on this architecture.
    pub fn reference() -> Self {
        Self::new(15.91, 0.0, 10.0, 17.04, 16.54, 20.84).expect("reference geometry is valid")
    }

    pub fn a2x(&self) -> f64 {
        self.a2x
    }
    pub fn a3x(&self) -> f64 {
        self.a3x
    }
    pub fn a3y(&self) -> f64 {
        self.a3y
    }
    pub fn d1(&self) -> f64 {
        self.d1
    }
    pub fn d2(&self) -> f64 {
        self.d2
    }
    pub fn d3(&self) -> f64 {
        self.d3
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Base anchors `A1`, `A2`, `A3`.
    pub fn base_anchors(&self) -> [Vector2<f64>; 3] {
        [
            Vector2::zeros(),
            Vector2::new(self.a2x, 0.0),
            Vector2::new(self.a3x, self.a3y),
        ]
    }

    /// Largest base coordinate magnitude; used to scale residual thresholds.
    pub fn base_scale(&self) -> f64 {
        self.a2x.max(self.a3x.abs()).max(self.a3y.abs())
    }

    /// Stable hex digest of the six defining parameters.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for v in [self.a2x, self.a3x, self.a3y, self.d1, self.d2, self.d3] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Renders the geometry in the config format accepted by [`load_geometry`].
    pub fn to_config_text(&self) -> String {
        format!(
            "# 3-RPR geometry; beta = {} rad (derived)\na2x = {:?}\na3x = {:?}\na3y = {:?}\nd1 = {:?}\nd2 = {:?}\nd3 = {:?}\n",
            self.beta, self.a2x, self.a3x, self.a3y, self.d1, self.d2, self.d3
        )
    }
}

/// Interior platform angle at `B1` from the three edge lengths.
pub fn platform_angle(d1: f64, d2: f64, d3: f64) -> Result<f64> {
    let cos = (d1 * d1 + d3 * d3 - d2 * d2) / (2.0 * d1 * d3);
    if !cos.is_finite() || !(-1.0 - ARCCOS_TOLERANCE..=1.0 + ARCCOS_TOLERANCE).contains(&cos) {
        return Err(Error::DegeneratePlatform(cos));
    }
    let beta = cos.clamp(-1.0, 1.0).acos();
    debug_assert!((0.0..=PI).contains(&beta));
    Ok(beta)
}

/// Parses a geometry config.
///
/// The format is line-oriented `key = value` text with `#` comments
/// (a strict subset of TOML). Required keys: `a2x`, `a3x`, `a3y`, `d1`,
/// `d2`, `d3`. Unknown keys are ignored.
pub fn load_geometry(config_text: &str) -> Result<ManipulatorGeometry> {
    let table: toml::Table = config_text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigSyntax(e.message().to_string()))?;
    let get = |key: &'static str| -> Result<f64> {
        match table.get(key) {
            None => Err(Error::MissingKey(key)),
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(toml::Value::String(s)) => s.trim().parse::<f64>().map_err(|_| Error::BadNumber {
                key,
                value: s.clone(),
            }),
            Some(other) => Err(Error::BadNumber {
                key,
                value: other.to_string(),
            }),
        }
    };
    ManipulatorGeometry::new(
        get("a2x")?,
        get("a3x")?,
        get("a3y")?,
        get("d1")?,
        get("d2")?,
        get("d3")?,
    )
}
