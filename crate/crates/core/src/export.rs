//! File formats: cloud CSV/PLY and workspace-image CSV/PLY.
//!
//! Numbers are written with 12 significant digits in `%g` style, so output
//! is byte-identical for identical inputs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::singularity::{SingularPoint, SingularityCloud};
use crate::workspace::WorkspaceSample;

pub const CLOUD_HEADER: [&str; 5] = ["rho1", "rho2", "rho3", "alpha", "theta1"];
pub const WORKSPACE_HEADER: [&str; 8] =
    ["x", "y", "alpha", "rho1", "rho2", "rho3", "det", "aspect"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Ply,
}

/// `%.{digits}g`: fixed notation for moderate exponents, scientific otherwise,
/// trailing zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp >= -4 && exp < digits as i32 {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn g12(x: f64) -> String {
    format_sig(x, 12)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Malformed(format!("{other:?}")),
    }
}

pub fn write_cloud_csv<W: Write>(cloud: &SingularityCloud, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLOUD_HEADER).map_err(csv_err)?;
    for p in cloud.points() {
        w.write_record([p.rho1, p.rho2, p.rho3, p.alpha, p.theta1].map(g12))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// ASCII PLY, vertex-only, with `x = rho1`, `y = rho2`, `z = rho3`.
pub fn write_cloud_ply<W: Write>(cloud: &SingularityCloud, mut out: W) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    write!(
        out,
        "ply\nformat ascii 1.0\ncomment joint-space singularity cloud, geometry {}\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.geometry_fingerprint,
        cloud.len()
    )?;
    for p in cloud.points() {
        writeln!(out, "{} {} {}", g12(p.rho1), g12(p.rho2), g12(p.rho3))?;
    }
    Ok(())
}

pub fn export_cloud(cloud: &SingularityCloud, format: CloudFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        CloudFormat::Csv => write_cloud_csv(cloud, &mut buf)?,
        CloudFormat::Ply => write_cloud_ply(cloud, &mut buf)?,
    }
    Ok(buf)
}

/// Reads points written by [`write_cloud_csv`].
pub fn read_cloud_csv<R: Read>(input: R) -> Result<Vec<SingularPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?;
    if header.iter().collect::<Vec<_>>() != CLOUD_HEADER {
        return Err(Error::Malformed(format!(
            "cloud header {:?}, expected {}",
            header.iter().collect::<Vec<_>>(),
            CLOUD_HEADER.join(",")
        )));
    }
    let mut points = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut v = [0.0; 5];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| Error::Malformed(format!("row {}: bad number {field:?}", line + 2)))?;
        }
        if record.len() != 5 {
            return Err(Error::Malformed(format!(
                "row {}: expected 5 fields",
                line + 2
            )));
        }
        points.push(SingularPoint {
            rho1: v[0],
            rho2: v[1],
            rho3: v[2],
            alpha: v[3],
            theta1: v[4],
        });
    }
    Ok(points)
}

pub fn write_workspace_csv<W: Write>(samples: &[WorkspaceSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WORKSPACE_HEADER).map_err(csv_err)?;
    for s in samples {
        let q = s.source_q;
        let mut row: Vec<String> = [
            s.pose.x,
            s.pose.y,
            s.pose.alpha,
            q.rho1,
            q.rho2,
            q.rho3,
            s.det,
        ]
        .into_iter()
        .map(g12)
        .collect();
        row.push(s.aspect.label().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// ASCII PLY of the `(x, y, alpha)` image with an integer aspect property (+1/−1).
pub fn write_workspace_ply<W: Write>(samples: &[WorkspaceSample], mut out: W) -> Result<()> {
    write!(
        out,
        "ply\nformat ascii 1.0\ncomment workspace image of a joint-space box\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty int aspect\nend_header\n",
        samples.len()
    )?;
    for s in samples {
        writeln!(
            out,
            "{} {} {} {}",
            g12(s.pose.x),
            g12(s.pose.y),
            g12(s.pose.alpha),
            s.aspect.sign()
        )?;
    }
    Ok(())
}
