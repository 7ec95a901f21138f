//! Named presets addressable as `name(key=value, ...)` strings.
//!
//! Arguments may be given by name or by position, e.g. `gauss_init(0,1)` and
//! `gauss_init(mean=0,var=1)` are the same preset.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::coeffs::{CoefficientSet, MatrixField};
use crate::model::init::{GaussComponent, InitialDensity};
use crate::model::kernel::KernelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    Kernel,
    Sigma,
    Nu,
    Initial,
}

#[derive(Clone, Copy, Debug)]
pub struct PresetInfo {
    pub name: &'static str,
    pub kind: PresetKind,
    pub params: &'static [(&'static str, f64)],
    pub summary: &'static str,
}

const PRESETS: &[PresetInfo] = &[
    PresetInfo { name: "zero", kind: PresetKind::Kernel, params: &[("d", 1.0)], summary: "k ≡ 0" },
    PresetInfo {
        name: "odd_bump",
        kind: PresetKind::Kernel,
        params: &[("a", 1.0), ("r", 1.0)],
        summary: "smooth odd attractive bump, sup |k| = a, support |z| < r (d = 1)",
    },
    PresetInfo {
        name: "step",
        kind: PresetKind::Kernel,
        params: &[("a", 1.0), ("r", 1.0)],
        summary: "a·sign(z) truncated to |z| < r (d = 1)",
    },
    PresetInfo {
        name: "const_iso",
        kind: PresetKind::Sigma,
        params: &[("s", 1.0), ("d", 1.0)],
        summary: "σ = s·I_d, δ = s²",
    },
    PresetInfo { name: "zero_nu", kind: PresetKind::Nu, params: &[("d", 1.0)], summary: "ν = 0 (d×1)" },
    PresetInfo { name: "const_nu", kind: PresetKind::Nu, params: &[("v", 1.0), ("d", 1.0)], summary: "ν = v·I_d" },
    PresetInfo {
        name: "rotation_nu",
        kind: PresetKind::Nu,
        params: &[("v", 1.0), ("c1", 10.0)],
        summary: "ν(z) = v·(-z₂, z₁) (d = 2); divergence free, violates the cancellation condition",
    },
    PresetInfo {
        name: "shear_nu",
        kind: PresetKind::Nu,
        params: &[("v", 1.0)],
        summary: "ν(z) = v·(sin z₂, 0) (d = 2); divergence free with cancellation",
    },
    PresetInfo {
        name: "gauss_init",
        kind: PresetKind::Initial,
        params: &[("mean", 0.0), ("var", 1.0), ("d", 1.0)],
        summary: "N(mean·1, var·I_d)",
    },
    PresetInfo {
        name: "two_bump",
        kind: PresetKind::Initial,
        params: &[("m", 1.5), ("var", 0.25)],
        summary: "½N(-m, var) + ½N(m, var)",
    },
    PresetInfo {
        name: "bump_init",
        kind: PresetKind::Initial,
        params: &[("c", 0.0), ("r", 1.0)],
        summary: "normalised smooth bump on |z - c| < r",
    },
];

/// Parsed `name(args)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetCall {
    pub name: String,
    pub args: Vec<(Option<String>, f64)>,
}

pub fn parse(spec: &str) -> Result<PresetCall> {
    let s = spec.trim();
    let err = |m: &str| Error::PresetSyntax(spec.to_string(), m.to_string());
    let (name, rest) = match s.find('(') {
        Some(i) => {
            if !s.ends_with(')') {
                return Err(err("missing closing parenthesis"));
            }
            (&s[..i], &s[i + 1..s.len() - 1])
        }
        None => (s, ""),
    };
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(err("bad preset name"));
    }
    let mut args = Vec::new();
    if !rest.trim().is_empty() {
        for part in rest.split(',') {
            let (key, val) = match part.split_once('=') {
                Some((k, v)) => (Some(k.trim().to_string()), v.trim()),
                None => (None, part.trim()),
            };
            let v: f64 = val.parse().map_err(|_| err(&format!("`{val}` is not a number")))?;
            args.push((key, v));
        }
    }
    Ok(PresetCall { name: name.to_string(), args })
}

/// Catalog of built-in kernels, coefficients and initial densities.
#[derive(Clone, Copy, Debug, Default)]
pub struct Catalog;

pub fn builtin_library() -> Catalog {
    Catalog
}

impl Catalog {
    pub fn presets(&self) -> &'static [PresetInfo] {
        PRESETS
    }

    pub fn names(&self, kind: PresetKind) -> Vec<&'static str> {
        PRESETS.iter().filter(|p| p.kind == kind).map(|p| p.name).collect()
    }

    fn resolve(&self, spec: &str, kind: PresetKind) -> Result<(&'static str, Vec<f64>)> {
        let call = parse(spec)?;
        let info = PRESETS
            .iter()
            .find(|p| p.kind == kind && p.name == call.name)
            .ok_or_else(|| Error::UnknownPreset { name: call.name.clone(), available: self.names(kind).join(", ") })?;
        let mut vals: Vec<f64> = info.params.iter().map(|p| p.1).collect();
        let mut set = vec![false; vals.len()];
        for (pos, (key, v)) in call.args.iter().enumerate() {
            let idx = match key {
                Some(k) => info.params.iter().position(|p| p.0 == k).ok_or_else(|| {
                    Error::PresetSyntax(spec.to_string(), format!("unknown parameter `{k}` for {}", info.name))
                })?,
                None if pos < vals.len() => pos,
                None => return Err(Error::PresetSyntax(spec.to_string(), "too many arguments".into())),
            };
            if set[idx] {
                return Err(Error::PresetSyntax(
                    spec.to_string(),
                    format!("parameter `{}` given twice", info.params[idx].0),
                ));
            }
            set[idx] = true;
            vals[idx] = *v;
        }
        Ok((info.name, vals))
    }

    pub fn kernel(&self, spec: &str) -> Result<KernelSpec> {
        let (name, p) = self.resolve(spec, PresetKind::Kernel)?;
        match name {
            "zero" => Ok(KernelSpec::zero(dim_param(p[0])?)),
            "odd_bump" => KernelSpec::odd_bump(p[0], p[1]),
            _ => KernelSpec::step(p[0], p[1]),
        }
    }

    /// σ field with its ellipticity constant.
    pub fn sigma(&self, spec: &str) -> Result<(MatrixField, f64)> {
        let (_, p) = self.resolve(spec, PresetKind::Sigma)?;
        let d = dim_param(p[1])?;
        if p[0] == 0.0 {
            return Err(Error::invalid("const_iso needs s ≠ 0 (ellipticity)"));
        }
        Ok((MatrixField::Constant(DMatrix::identity(d, d) * p[0]), p[0] * p[0]))
    }

    /// ν field with the C¹ bound it needs.
    pub fn nu(&self, spec: &str) -> Result<(MatrixField, f64)> {
        let (name, p) = self.resolve(spec, PresetKind::Nu)?;
        Ok(match name {
            "zero_nu" => (MatrixField::Constant(DMatrix::zeros(dim_param(p[0])?, 1)), 0.0),
            "const_nu" => {
                let d = dim_param(p[1])?;
                (MatrixField::Constant(DMatrix::identity(d, d) * p[0]), p[0].abs())
            }
            "rotation_nu" => {
                let v = p[0];
                (
                    MatrixField::variable(2, 1, move |_, z| DMatrix::from_column_slice(2, 1, &[-v * z[1], v * z[0]])),
                    p[1],
                )
            }
            _ => {
                let v = p[0];
                (
                    MatrixField::variable(2, 1, move |_, z| DMatrix::from_column_slice(2, 1, &[v * z[1].sin(), 0.0])),
                    v.abs(),
                )
            }
        })
    }

    pub fn coefficients(&self, sigma: &str, nu: &str) -> Result<CoefficientSet> {
        let (s, delta) = self.sigma(sigma)?;
        let (n, nu_c1) = self.nu(nu)?;
        let s_c1 = s.as_constant().map(|m| m.amax()).unwrap_or(1.0);
        CoefficientSet::new(format!("{sigma}|{nu}"), s, n, delta, s_c1.max(nu_c1))
    }

    pub fn initial(&self, spec: &str) -> Result<InitialDensity> {
        let (name, p) = self.resolve(spec, PresetKind::Initial)?;
        match name {
            "gauss_init" => InitialDensity::gaussian(dim_param(p[2])?, p[0], p[1]),
            "two_bump" => InitialDensity::mixture(vec![
                GaussComponent { weight: 0.5, mean: -p[0], var: p[1] },
                GaussComponent { weight: 0.5, mean: p[0], var: p[1] },
            ]),
            _ => InitialDensity::bump(p[0], p[1]),
        }
    }
}

fn dim_param(v: f64) -> Result<usize> {
    if (1.0..=3.0).contains(&v) && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::invalid(format!("dimension parameter must be 1, 2 or 3, got {v}")))
    }
}
