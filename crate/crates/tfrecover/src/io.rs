//! File formats: trajectory CSV, system/model JSON, recovery tables.
//!
//! Floating-point CSV fields carry 17 significant digits so a write/read
//! round trip is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::informativity::RecoveryResult;
use crate::lti::{StateSpaceSystem, TimeSeries};
use crate::metrics::FrequencySweep;
use crate::rom::{DescriptorROM, InterpolationData, VfModel};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a trajectory as `k,u,y` rows.
pub fn write_time_series_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    let mut out = String::with_capacity(ts.len() * 48);
    out.push_str("k,u,y\n");
    for k in 0..ts.len() {
        out.push_str(&format!("{k},{},{}\n", fmt(ts.u()[k]), fmt(ts.y()[k])));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `k,u,y` trajectory file.
pub fn read_time_series_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "k,u,y" {
                return Err(Error::Config(format!(
                    "{}: expected header 'k,u,y', found '{line}'",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let _k = parts.next();
        let uv = parts
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}: bad row {lineno}", path.display())))?;
        let yv = parts
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}: bad row {lineno}", path.display())))?;
        u.push(uv);
        y.push(yv);
    }
    TimeSeries::new(u, y)
}

#[derive(Serialize, Deserialize)]
struct SystemJson {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

pub fn write_state_space_json(path: &Path, sys: &StateSpaceSystem) -> Result<()> {
    let n = sys.order();
    let doc = SystemJson {
        n,
        a: (0..n)
            .map(|i| (0..n).map(|j| sys.a()[(i, j)]).collect())
            .collect(),
        b: sys.b().as_slice().to_vec(),
        c: sys.c().as_slice().to_vec(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc).expect("serialize"))?;
    Ok(())
}

pub fn read_state_space_json(path: &Path) -> Result<StateSpaceSystem> {
    let doc: SystemJson = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let n = doc.n;
    if doc.a.len() != n || doc.a.iter().any(|row| row.len() != n) {
        return Err(Error::Config(format!(
            "{}: state matrix is not {n}x{n}",
            path.display()
        )));
    }
    let a = DMatrix::from_fn(n, n, |i, j| doc.a[i][j]);
    StateSpaceSystem::new(a, DVector::from_vec(doc.b), DVector::from_vec(doc.c))
}

/// Flat serialization of one recovered point.
#[derive(Debug, Serialize, Deserialize, Clone)]
pub struct RecoveryRecord {
    pub omega: f64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    #[serde(rename = "M0_re")]
    pub m0_re: Option<f64>,
    #[serde(rename = "M0_im")]
    pub m0_im: Option<f64>,
    #[serde(rename = "M1_re")]
    pub m1_re: Option<f64>,
    #[serde(rename = "M1_im")]
    pub m1_im: Option<f64>,
    #[serde(rename = "sW0")]
    pub sw0: Option<f64>,
    #[serde(rename = "sW1")]
    pub sw1: Option<f64>,
    pub n_used: usize,
    pub informative: bool,
}

impl From<&RecoveryResult> for RecoveryRecord {
    fn from(r: &RecoveryResult) -> Self {
        Self {
            omega: r.sigma.arg(),
            sigma_re: r.sigma.re,
            sigma_im: r.sigma.im,
            m0_re: r.m0.map(|v| v.re),
            m0_im: r.m0.map(|v| v.im),
            m1_re: r.m1.map(|v| v.re),
            m1_im: r.m1.map(|v| v.im),
            sw0: r.sw0.is_finite().then_some(r.sw0),
            sw1: r.sw1.filter(|v| v.is_finite()),
            n_used: r.n_used,
            informative: r.informative,
        }
    }
}

pub fn write_recovery_json(path: &Path, results: &[RecoveryResult]) -> Result<()> {
    let records: Vec<RecoveryRecord> = results.iter().map(RecoveryRecord::from).collect();
    fs::write(
        path,
        serde_json::to_string_pretty(&records).expect("serialize"),
    )?;
    Ok(())
}

pub fn read_recovery_json(path: &Path) -> Result<Vec<RecoveryRecord>> {
    serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_recovery_csv(path: &Path, results: &[RecoveryResult]) -> Result<()> {
    let mut out = String::new();
    out.push_str("omega,sigma_re,sigma_im,M0_re,M0_im,M1_re,M1_im,sW0,sW1,n_used,informative\n");
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_else(|| "nan".into());
    for r in results {
        let rec = RecoveryRecord::from(r);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(rec.omega),
            fmt(rec.sigma_re),
            fmt(rec.sigma_im),
            opt(rec.m0_re),
            opt(rec.m0_im),
            opt(rec.m1_re),
            opt(rec.m1_im),
            opt(rec.sw0),
            opt(rec.sw1),
            rec.n_used,
            rec.informative
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Converts recovery records to interpolation data, keeping informative
/// points only. Derivatives are attached when every kept record has one.
pub fn records_to_interpolation(records: &[RecoveryRecord]) -> Result<InterpolationData> {
    let kept: Vec<&RecoveryRecord> = records
        .iter()
        .filter(|r| r.informative && r.m0_re.is_some())
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidParameter(
            "no informative recovery records to build a model from".into(),
        ));
    }
    let points: Vec<Complex64> = kept
        .iter()
        .map(|r| Complex64::new(r.sigma_re, r.sigma_im))
        .collect();
    let values: Vec<Complex64> = kept
        .iter()
        .map(|r| Complex64::new(r.m0_re.unwrap(), r.m0_im.unwrap()))
        .collect();
    let mut data = InterpolationData::new(points, values)?;
    if kept.iter().all(|r| r.m1_re.is_some()) {
        let derivs = kept
            .iter()
            .map(|r| Complex64::new(r.m1_re.unwrap(), r.m1_im.unwrap()))
            .collect();
        data = data.with_derivs(derivs)?;
    }
    Ok(data)
}

#[derive(Serialize, Deserialize)]
struct RomJson {
    r: usize,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

pub fn write_rom_json(path: &Path, rom: &DescriptorROM) -> Result<()> {
    let r = rom.order();
    let doc = RomJson {
        r,
        e: (0..r)
            .map(|i| (0..r).map(|j| rom.e[(i, j)]).collect())
            .collect(),
        a: (0..r)
            .map(|i| (0..r).map(|j| rom.a[(i, j)]).collect())
            .collect(),
        b: rom.b.as_slice().to_vec(),
        c: rom.c.as_slice().to_vec(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc).expect("serialize"))?;
    Ok(())
}

pub fn read_rom_json(path: &Path) -> Result<DescriptorROM> {
    let doc: RomJson = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let r = doc.r;
    DescriptorROM::new(
        DMatrix::from_fn(r, r, |i, j| doc.e[i][j]),
        DMatrix::from_fn(r, r, |i, j| doc.a[i][j]),
        DVector::from_vec(doc.b),
        DVector::from_vec(doc.c),
    )
}

#[derive(Serialize, Deserialize)]
struct VfJson {
    r: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    poles: Vec<[f64; 2]>,
    residues: Vec<[f64; 2]>,
    offset: f64,
}

pub fn write_vf_json(path: &Path, model: &VfModel) -> Result<()> {
    let doc = VfJson {
        r: model.rational.order(),
        p: model.rational.denominator().to_vec(),
        q: model.rational.numerator().to_vec(),
        poles: model.poles.iter().map(|c| [c.re, c.im]).collect(),
        residues: model.residues.iter().map(|c| [c.re, c.im]).collect(),
        offset: model.offset,
    };
    fs::write(path, serde_json::to_string_pretty(&doc).expect("serialize"))?;
    Ok(())
}

/// Pole/residue form read back from a vector-fitting model file.
pub struct VfModelFile {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    pub offset: f64,
}

impl VfModelFile {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.offset
            + self
                .poles
                .iter()
                .zip(self.residues.iter())
                .map(|(p, r)| r / (z - p))
                .sum::<Complex64>()
    }
}

pub fn read_vf_json(path: &Path) -> Result<VfModelFile> {
    let doc: VfJson = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(VfModelFile {
        poles: doc.poles.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        residues: doc
            .residues
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect(),
        offset: doc.offset,
    })
}

/// Writes a sweep as `omega,abs,re,im` rows.
pub fn write_sweep_csv(path: &Path, sweep: &FrequencySweep) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "omega,abs,re,im")?;
    for (w, v) in sweep.omegas.iter().zip(sweep.values.iter()) {
        writeln!(file, "{},{},{},{}", fmt(*w), fmt(v.norm()), fmt(v.re), fmt(v.im))?;
    }
    Ok(())
}
