use std::fs;
use std::path::Path;

use catsim_core::analysis::{
    fit_damped_cosine, fit_exponential, fit_wigner_cuts, WignerCutData, WignerCutParams,
};

use crate::config::{FitJob, SeriesInput};
use crate::error::{CliError, CliResult};
use crate::output::{json_artifact, Artifact};

/// Two numeric columns of a CSV file; `field` names the config entry in error messages.
fn read_series(
    base: &Path,
    input: &Path,
    x: Option<&str>,
    y: Option<&str>,
    field: &str,
) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let path = base.join(input);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let bad = |reason: String| CliError::config(format!("{field}.input"), reason);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: Option<&str>, default: usize| -> CliResult<usize> {
        match name {
            Some(n) => header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| bad(format!("no column `{n}`"))),
            None if default < header.len() => Ok(default),
            None => Err(bad(format!("needs at least {} columns", default + 1))),
        }
    };
    let (ix, iy) = (column(x, 0)?, column(y, 1)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| -> CliResult<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("row {}: `{s}` is not a finite number", k + 2)))
        };
        xs.push(get(ix)?);
        ys.push(get(iy)?);
    }
    Ok((xs, ys))
}

fn series(base: &Path, s: &SeriesInput, field: &str) -> CliResult<(Vec<f64>, Vec<f64>)> {
    read_series(base, &s.input, s.x.as_deref(), s.y.as_deref(), field)
}

pub fn run(j: &FitJob, base: &Path) -> CliResult<Vec<Artifact>> {
    let fit = match j {
        FitJob::Exponential { input, x, y } => {
            let (t, v) = read_series(base, input, x.as_deref(), y.as_deref(), "fit")?;
            fit_exponential(&t, &v)?
        }
        FitJob::DampedCosine { input, x, y } => {
            let (t, v) = read_series(base, input, x.as_deref(), y.as_deref(), "fit")?;
            fit_damped_cosine(&t, &v)?
        }
        FitJob::WignerCuts {
            mixture,
            cat,
            thermal,
            alpha,
            n_th,
        } => {
            let data = WignerCutData {
                mixture: series(base, mixture, "fit.mixture")?,
                cat: series(base, cat, "fit.cat")?,
                thermal: series(base, thermal, "fit.thermal")?,
            };
            fit_wigner_cuts(&data, &WignerCutParams::theoretical(*alpha, *n_th))?
        }
    };
    Ok(vec![json_artifact("fit.json", &fit)])
}
