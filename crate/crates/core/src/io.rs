//! JSON interchange formats. Complex numbers are `[re, im]` pairs and
//! matrices are row-major arrays of rows.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::derive::{CaraProblem, Variant};
use crate::displacement::DisplacementSystem;
use crate::error::{Error, Result};
use crate::interpolate::{NPProblem, Settings};
use crate::linalg::{c, CMatrix};
use crate::points::OperatorTuple;
use crate::schur::SchurElement;
use crate::words::{enumerate_words, Word};

pub const FORMAT_VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, |r| r.len());
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(format_err("matrix rows have different lengths"));
        }
        let data: Vec<f64> = self.0.iter().flatten().flat_map(|z| z.iter().copied()).collect();
        if data.iter().any(|x| !x.is_finite()) {
            return Err(format_err("matrix entries must be finite"));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            let z = self.0[i][j];
            c(z[0], z[1])
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointJson {
    #[serde(rename = "N")]
    pub alphabet: usize,
    #[serde(rename = "dimE")]
    pub dim: usize,
    #[serde(rename = "Z")]
    pub components: Vec<MatrixJson>,
}

impl From<&OperatorTuple> for PointJson {
    fn from(z: &OperatorTuple) -> Self {
        PointJson { alphabet: z.alphabet(), dim: z.dim(), components: z.components().iter().map(MatrixJson::from).collect() }
    }
}

impl PointJson {
    pub fn to_point(&self) -> Result<OperatorTuple> {
        if self.components.len() != self.alphabet || self.alphabet == 0 {
            return Err(format_err(format!("point declares N = {} but has {} components", self.alphabet, self.components.len())));
        }
        let comps = self.components.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
        if comps.iter().any(|m| m.shape() != (self.dim, self.dim)) {
            return Err(format_err(format!("point components must be {0}x{0}", self.dim)));
        }
        OperatorTuple::new(comps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub word: Word,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurJson {
    #[serde(rename = "N")]
    pub alphabet: usize,
    #[serde(rename = "dimE")]
    pub dim: usize,
    #[serde(rename = "K")]
    pub degree: usize,
    pub coeffs: Vec<CoeffJson>,
}

impl From<&SchurElement> for SchurJson {
    fn from(t: &SchurElement) -> Self {
        let coeffs = (0..=t.degree())
            .flat_map(|j| {
                let words = enumerate_words(t.alphabet(), j).expect("N ≥ 1");
                words.into_iter().zip(t.level(j)).map(|(word, m)| CoeffJson { word, matrix: m.into() }).collect::<Vec<_>>()
            })
            .collect();
        SchurJson { alphabet: t.alphabet(), dim: t.dim(), degree: t.degree(), coeffs }
    }
}

impl SchurJson {
    pub fn to_element(&self) -> Result<SchurElement> {
        if self.alphabet == 0 {
            return Err(format_err("N must be positive"));
        }
        let mut t = SchurElement::zero(self.alphabet, self.dim, self.degree);
        for entry in &self.coeffs {
            t.set_coeff(&entry.word, entry.matrix.to_matrix()?)?;
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NpJson {
    pub points: Vec<PointJson>,
    pub targets: Vec<MatrixJson>,
}

impl From<&NPProblem> for NpJson {
    fn from(p: &NPProblem) -> Self {
        NpJson {
            points: p.points().iter().map(PointJson::from).collect(),
            targets: p.targets().iter().map(MatrixJson::from).collect(),
        }
    }
}

impl NpJson {
    pub fn to_problem(&self) -> Result<NPProblem> {
        let points = self.points.iter().map(PointJson::to_point).collect::<Result<Vec<_>>>()?;
        let targets = self.targets.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
        NPProblem::new(points, targets)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetJson {
    pub k: usize,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaraJson {
    #[serde(rename = "Z")]
    pub point: PointJson,
    pub l: usize,
    pub variant: Variant,
    pub targets: Vec<TargetJson>,
}

impl From<&CaraProblem> for CaraJson {
    fn from(p: &CaraProblem) -> Self {
        CaraJson {
            point: p.point().into(),
            l: p.order(),
            variant: p.variant(),
            targets: p.targets().iter().enumerate().map(|(k, m)| TargetJson { k, matrix: m.into() }).collect(),
        }
    }
}

impl CaraJson {
    pub fn to_problem(&self) -> Result<CaraProblem> {
        let point = self.point.to_point()?;
        let mut slots: Vec<Option<CMatrix>> = vec![None; self.l + 1];
        for t in &self.targets {
            let slot = slots.get_mut(t.k).ok_or_else(|| format_err(format!("target k = {} exceeds l = {}", t.k, self.l)))?;
            if slot.replace(t.matrix.to_matrix()?).is_some() {
                return Err(format_err(format!("target k = {} given twice", t.k)));
            }
        }
        let targets = slots
            .into_iter()
            .enumerate()
            .map(|(k, m)| m.ok_or_else(|| format_err(format!("missing target k = {k}"))))
            .collect::<Result<Vec<_>>>()?;
        CaraProblem::new(point, self.l, self.variant, targets)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelJson {
    #[serde(rename = "Z")]
    pub z: PointJson,
    #[serde(rename = "W")]
    pub w: PointJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementJson {
    #[serde(rename = "F")]
    pub fs: Vec<MatrixJson>,
    #[serde(rename = "U")]
    pub u: MatrixJson,
    #[serde(rename = "V")]
    pub v: MatrixJson,
}

impl From<&DisplacementSystem> for DisplacementJson {
    fn from(s: &DisplacementSystem) -> Self {
        DisplacementJson { fs: s.fs().iter().map(MatrixJson::from).collect(), u: s.u().into(), v: s.v().into() }
    }
}

impl DisplacementJson {
    pub fn to_system(&self) -> Result<DisplacementSystem> {
        let fs = self.fs.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
        let u = self.u.to_matrix()?;
        let mut v = self.v.to_matrix()?;
        // an empty V (`[]`) means q = 0
        if v.nrows() == 0 {
            v = CMatrix::zeros(u.nrows(), 0);
        }
        DisplacementSystem::new(fs, u, v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TolerancesJson {
    #[serde(default = "default_psd")]
    pub psd: f64,
    #[serde(default = "default_interp")]
    pub interp: f64,
    #[serde(default = "default_series")]
    pub series: f64,
}

fn default_psd() -> f64 {
    Settings::default().tol_psd
}

fn default_interp() -> f64 {
    Settings::default().tol_interp
}

fn default_series() -> f64 {
    Settings::default().tol_series
}

impl Default for TolerancesJson {
    fn default() -> Self {
        TolerancesJson { psd: default_psd(), interp: default_interp(), series: default_series() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsJson {
    #[serde(rename = "K", default = "default_k")]
    pub k_out: usize,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: usize,
    #[serde(default)]
    pub tolerances: TolerancesJson,
}

fn default_k() -> usize {
    Settings::default().k_out
}

fn default_depth_cap() -> usize {
    Settings::default().depth_cap
}

impl Default for SettingsJson {
    fn default() -> Self {
        SettingsJson::from(&Settings::default())
    }
}

impl From<&Settings> for SettingsJson {
    fn from(s: &Settings) -> Self {
        SettingsJson {
            k_out: s.k_out,
            depth_cap: s.depth_cap,
            tolerances: TolerancesJson { psd: s.tol_psd, interp: s.tol_interp, series: s.tol_series },
        }
    }
}

impl SettingsJson {
    pub fn to_settings(&self) -> Result<Settings> {
        let t = &self.tolerances;
        if [t.psd, t.interp, t.series].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(format_err("tolerances must be positive"));
        }
        Ok(Settings {
            tol_psd: t.psd,
            tol_interp: t.interp,
            tol_series: t.series,
            depth_cap: self.depth_cap,
            k_out: self.k_out,
            ..Settings::default()
        })
    }
}

/// A parsed problem of either kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    NevPick(NPProblem),
    Cara(CaraProblem),
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::NevPick(_) => "nevpick",
            Problem::Cara(_) => "cara",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub problem: Problem,
    pub settings: SettingsJson,
}

impl InstanceFile {
    pub fn new(problem: Problem, settings: &Settings) -> Self {
        InstanceFile { problem, settings: settings.into() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
        let obj = raw.as_object().ok_or_else(|| format_err("instance must be a JSON object"))?;
        match obj.get("version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(format_err(format!("unsupported version {v}"))),
            None => return Err(format_err("missing version")),
        }
        let kind = obj.get("kind").and_then(Value::as_str).ok_or_else(|| format_err("missing kind"))?;
        let payload = obj.get("payload").cloned().ok_or_else(|| format_err("missing payload"))?;
        let problem = match kind {
            "nevpick" => {
                let p: NpJson = serde_json::from_value(payload).map_err(|e| format_err(e.to_string()))?;
                Problem::NevPick(p.to_problem()?)
            }
            "cara" => {
                let p: CaraJson = serde_json::from_value(payload).map_err(|e| format_err(e.to_string()))?;
                Problem::Cara(p.to_problem()?)
            }
            other => return Err(format_err(format!("unknown kind {other:?}"))),
        };
        let settings = match obj.get("settings") {
            Some(s) => serde_json::from_value(s.clone()).map_err(|e| format_err(e.to_string()))?,
            None => SettingsJson::default(),
        };
        Ok(InstanceFile { problem, settings })
    }

    pub fn to_value(&self) -> Value {
        let payload = match &self.problem {
            Problem::NevPick(p) => serde_json::to_value(NpJson::from(p)),
            Problem::Cara(p) => serde_json::to_value(CaraJson::from(p)),
        }
        .expect("plain data serializes");
        serde_json::json!({
            "version": FORMAT_VERSION,
            "kind": self.problem.kind(),
            "payload": payload,
            "settings": self.settings,
        })
    }
}

/// Parses a JSON document into a serde type with format errors.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| format_err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schur::random_schur;

    #[test]
    fn matrix_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| c(i as f64, -(j as f64) * 0.5));
        let text = serde_json::to_string(&MatrixJson::from(&m)).unwrap();
        assert_eq!(text, "[[[0.0,-0.0],[0.0,-0.5],[0.0,-1.0]],[[1.0,-0.0],[1.0,-0.5],[1.0,-1.0]]]");
        let back: MatrixJson = parse_json(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
        let ragged: MatrixJson = parse_json("[[[1,0]],[]]").unwrap();
        assert!(ragged.to_matrix().is_err());
    }

    #[test]
    fn schur_round_trip() {
        let t = random_schur(3, 2, 2, 3, 0.9).unwrap();
        let text = serde_json::to_string(&SchurJson::from(&t)).unwrap();
        let back: SchurJson = parse_json(&text).unwrap();
        assert_eq!(back.to_element().unwrap(), t);
    }

    #[test]
    fn instance_round_trip() {
        let z = OperatorTuple::zero(2, 1);
        let prob = NPProblem::new(vec![z], vec![CMatrix::from_element(1, 1, c(0.5, 0.0))]).unwrap();
        let inst = InstanceFile::new(Problem::NevPick(prob), &Settings::default());
        let text = serde_json::to_string(&inst.to_value()).unwrap();
        assert_eq!(InstanceFile::parse(&text).unwrap(), inst);

        let cara = CaraProblem::new(
            OperatorTuple::zero(1, 1),
            1,
            Variant::Total,
            vec![CMatrix::from_element(1, 1, c(0.5, 0.0)), CMatrix::from_element(1, 1, c(0.1, 0.0))],
        )
        .unwrap();
        let inst = InstanceFile::new(Problem::Cara(cara), &Settings::default());
        let text = serde_json::to_string(&inst.to_value()).unwrap();
        assert!(text.contains("\"variant\":\"total\""));
        assert_eq!(InstanceFile::parse(&text).unwrap(), inst);
    }

    #[test]
    fn instance_errors() {
        assert!(matches!(InstanceFile::parse("{"), Err(Error::Format(_))));
        assert!(matches!(InstanceFile::parse(r#"{"version":2,"kind":"nevpick","payload":{}}"#), Err(Error::Format(_))));
        assert!(matches!(InstanceFile::parse(r#"{"version":1,"kind":"other","payload":{}}"#), Err(Error::Format(_))));
        let outside = r#"{"version":1,"kind":"nevpick","payload":{"points":[{"N":1,"dimE":1,"Z":[[[[2,0]]]]}],"targets":[[[[0,0]]]]}}"#;
        assert!(matches!(InstanceFile::parse(outside), Err(Error::NotInBall { .. })));
    }

    #[test]
    fn settings_defaults() {
        let s: SettingsJson = parse_json("{}").unwrap();
        assert_eq!(s.to_settings().unwrap(), Settings::default());
    }
}
