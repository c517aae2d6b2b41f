//! On-disk formats: REFSOL reference files and flat parameter dumps.

use std::fs;
use std::path::Path;

use acsm_core::diffnet::{MlpArchitecture, ParameterVector};
use acsm_core::refsolver::ReferenceSolution;
use anyhow::{bail, Context, Result};

pub fn store_reference(sol: &ReferenceSolution, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, sol.to_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn load_reference(path: &Path) -> Result<ReferenceSolution> {
    let bytes = fs::read(path).with_context(|| format!("reading reference file {}", path.display()))?;
    ReferenceSolution::from_bytes(&bytes).with_context(|| format!("loading {}", path.display()))
}

const PARAMS_MAGIC: &str = "PARAMS v1";

/// One header line `PARAMS v1 widths=<w0,w1,...> count=<n>` followed by
/// `n` little-endian `f64` values.
pub fn store_params(params: &ParameterVector, arch: &MlpArchitecture, path: &Path) -> Result<()> {
    let widths: Vec<String> = arch.widths().iter().map(usize::to_string).collect();
    let mut out = format!("{PARAMS_MAGIC} widths={} count={}\n", widths.join(","), params.len()).into_bytes();
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn load_params(path: &Path) -> Result<(MlpArchitecture, ParameterVector)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let nl = bytes.iter().position(|&b| b == b'\n').context("parameter file has no header line")?;
    let header = std::str::from_utf8(&bytes[..nl])?;
    let rest = header.strip_prefix(PARAMS_MAGIC).context("bad parameter file magic")?;
    let mut widths = None;
    let mut count = None;
    for field in rest.split_whitespace() {
        if let Some(w) = field.strip_prefix("widths=") {
            widths = Some(w.split(',').map(str::parse).collect::<Result<Vec<usize>, _>>()?);
        } else if let Some(c) = field.strip_prefix("count=") {
            count = Some(c.parse::<usize>()?);
        }
    }
    let arch = MlpArchitecture::new(widths.context("missing widths")?)?;
    let count = count.context("missing count")?;
    if count != arch.param_count() {
        bail!("parameter count {count} does not match architecture ({})", arch.param_count());
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != count * 8 {
        bail!("parameter payload has {} bytes, expected {} bytes", payload.len(), count * 8);
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((arch, ParameterVector::from_vec(values)?))
}
