use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::SymMat;

use super::{BcCommonInstance, BcPrivateInstance, BrascampLiebInstance, ProblemInstance};

pub const SCHEMA_VERSION: u32 = 1;

/// How a synthetic instance was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub n: usize,
    pub seed: u64,
    pub cond: f64,
}

/// Dense matrix stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixDoc {
    fn from_sym<T: Real>(m: &SymMat<T>) -> Self {
        Self { rows: m.dim(), cols: m.dim(), data: m.to_row_major().iter().map(|x| x.as_f64()).collect() }
    }

    fn from_dense<T: Real>(m: &DMatrix<T>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)].as_f64())).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn check_shape(&self, what: &str) -> Result<()> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::invalid(format!(
                "{what}: {}×{} matrix with {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }

    fn to_sym<T: Real>(&self, what: &str) -> Result<SymMat<T>> {
        self.check_shape(what)?;
        if self.rows != self.cols {
            return Err(Error::invalid(format!("{what} must be square")));
        }
        let entries: Vec<T> = self.data.iter().map(|&x| T::lit(x)).collect();
        SymMat::from_row_major(self.rows, &entries).map_err(|e| Error::invalid(format!("{what}: {e}")))
    }

    fn to_dense<T: Real>(&self, what: &str) -> Result<DMatrix<T>> {
        self.check_shape(what)?;
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{what} has non-finite entries")));
        }
        Ok(DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().map(|&x| T::lit(x))))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum InstanceDoc {
    BcPrivate {
        schema_version: u32,
        provenance: Option<Provenance>,
        sigma1: MatrixDoc,
        sigma2: MatrixDoc,
        cap: MatrixDoc,
        lambda: f64,
    },
    BcCommon {
        schema_version: u32,
        provenance: Option<Provenance>,
        sigma1: MatrixDoc,
        sigma2: MatrixDoc,
        cap: MatrixDoc,
        alpha: f64,
        beta: f64,
        lambda: f64,
    },
    BrascampLieb {
        schema_version: u32,
        provenance: Option<Provenance>,
        p: usize,
        q: usize,
        n: Vec<usize>,
        m: Vec<usize>,
        /// `a[i][j]` is `A_ij`.
        a: Vec<Vec<MatrixDoc>>,
        caps: Vec<MatrixDoc>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        rho: f64,
    },
}

pub fn instance_to_json<T: Real>(inst: &ProblemInstance<T>, provenance: Option<&Provenance>) -> Result<String> {
    let provenance = provenance.copied();
    let doc = match inst {
        ProblemInstance::BcPrivate(i) => InstanceDoc::BcPrivate {
            schema_version: SCHEMA_VERSION,
            provenance,
            sigma1: MatrixDoc::from_sym(&i.sigma1),
            sigma2: MatrixDoc::from_sym(&i.sigma2),
            cap: MatrixDoc::from_sym(&i.cap),
            lambda: i.lambda.as_f64(),
        },
        ProblemInstance::BcCommon(i) => InstanceDoc::BcCommon {
            schema_version: SCHEMA_VERSION,
            provenance,
            sigma1: MatrixDoc::from_sym(&i.sigma1),
            sigma2: MatrixDoc::from_sym(&i.sigma2),
            cap: MatrixDoc::from_sym(&i.cap),
            alpha: i.alpha.as_f64(),
            beta: i.beta.as_f64(),
            lambda: i.lambda.as_f64(),
        },
        ProblemInstance::BrascampLieb(i) => InstanceDoc::BrascampLieb {
            schema_version: SCHEMA_VERSION,
            provenance,
            p: i.p(),
            q: i.q(),
            n: i.n.clone(),
            m: i.m.clone(),
            a: i.a.iter().map(|row| row.iter().map(MatrixDoc::from_dense).collect()).collect(),
            caps: i.caps.iter().map(MatrixDoc::from_sym).collect(),
            alpha: i.alpha.iter().map(|x| x.as_f64()).collect(),
            beta: i.beta.iter().map(|x| x.as_f64()).collect(),
            rho: i.rho.as_f64(),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::invalid(format!("unsupported instance schema version {v}")))
    }
}

pub fn instance_from_json<T: Real>(text: &str) -> Result<(ProblemInstance<T>, Option<Provenance>)> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    match doc {
        InstanceDoc::BcPrivate { schema_version, provenance, sigma1, sigma2, cap, lambda } => {
            check_version(schema_version)?;
            let inst = BcPrivateInstance::new(
                sigma1.to_sym("sigma1")?,
                sigma2.to_sym("sigma2")?,
                cap.to_sym("cap")?,
                T::lit(lambda),
            )?;
            Ok((ProblemInstance::BcPrivate(inst), provenance))
        }
        InstanceDoc::BcCommon { schema_version, provenance, sigma1, sigma2, cap, alpha, beta, lambda } => {
            check_version(schema_version)?;
            let inst = BcCommonInstance::new(
                sigma1.to_sym("sigma1")?,
                sigma2.to_sym("sigma2")?,
                cap.to_sym("cap")?,
                T::lit(alpha),
                T::lit(beta),
                T::lit(lambda),
            )?;
            Ok((ProblemInstance::BcCommon(inst), provenance))
        }
        InstanceDoc::BrascampLieb { schema_version, provenance, p, q, n, m, a, caps, alpha, beta, rho } => {
            check_version(schema_version)?;
            if n.len() != p || m.len() != q || a.len() != p || a.iter().any(|row| row.len() != q) {
                return Err(Error::invalid("block counts disagree with p and q"));
            }
            let a = a
                .iter()
                .enumerate()
                .map(|(i, row)| row.iter().enumerate().map(|(j, d)| d.to_dense(&format!("a[{i}][{j}]"))).collect())
                .collect::<Result<Vec<Vec<_>>>>()?;
            let caps =
                caps.iter().enumerate().map(|(i, d)| d.to_sym(&format!("caps[{i}]"))).collect::<Result<Vec<_>>>()?;
            let inst = BrascampLiebInstance::new(
                a,
                caps,
                alpha.iter().map(|&x| T::lit(x)).collect(),
                beta.iter().map(|&x| T::lit(x)).collect(),
                T::lit(rho),
            )?;
            if inst.n != n || inst.m != m {
                return Err(Error::invalid("declared block sizes disagree with the matrices"));
            }
            Ok((ProblemInstance::BrascampLieb(inst), provenance))
        }
    }
}

pub fn write_instance<T: Real>(path: &Path, inst: &ProblemInstance<T>, provenance: Option<&Provenance>) -> Result<()> {
    let text = instance_to_json(inst, provenance)?;
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn read_instance<T: Real>(path: &Path) -> Result<(ProblemInstance<T>, Option<Provenance>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    instance_from_json(&text)
}
