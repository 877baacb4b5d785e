//! CSV rows and atomic artifact writes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fintime_core::EnsembleResult;

pub const CSV_HEADER: &str = "swept_name,swept_value,scheme,k,alpha,q,n_total,n_hit,n_censored,n_blowup,\
mean_tau,std_tau,mean_energy,std_energy,mean_crossings,t_f_sup,e_q_sup,feasible";

/// Label and value of the swept column; `None` for a single run.
pub type Swept<'a> = Option<(&'a str, f64)>;

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn csv_row(swept: Swept<'_>, ens: &EnsembleResult) -> String {
    let exp = &ens.params_echo;
    let (name, value) = match swept {
        Some((n, v)) => (n.to_string(), v.to_string()),
        None => ("none".to_string(), String::new()),
    };
    let mut row = String::new();
    write!(
        row,
        "{name},{value},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        exp.controller.scheme.name(),
        exp.controller.k,
        exp.controller.alpha,
        exp.sim.q,
        ens.n_total,
        ens.n_hit,
        ens.n_censored,
        ens.n_blowup,
        cell(ens.mean_tau),
        cell(ens.std_tau),
        cell(ens.mean_energy),
        cell(ens.std_energy),
        cell(ens.mean_crossings),
        cell(ens.t_f_sup()),
        cell(ens.e_q_sup()),
        cell(ens.feasible),
    )
    .expect("writing to a String");
    row
}

pub fn csv_document<'a>(rows: impl IntoIterator<Item = (Swept<'a>, &'a EnsembleResult)>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (swept, ens) in rows {
        out.push_str(&csv_row(swept, ens));
        out.push('\n');
    }
    out
}

/// Creates `dir` if needed and checks a file can be created in it.
pub fn ensure_writable(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(format!(".fintime-probe-{}", std::process::id()));
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)
}

/// Writes every file to a temporary sibling first and renames only once all
/// of them are on disk. On failure the temporaries are removed.
pub fn write_atomic(files: &[(PathBuf, String)]) -> io::Result<()> {
    let temps: Vec<PathBuf> = files
        .iter()
        .map(|(path, _)| {
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(format!(".tmp{}", std::process::id()));
            path.with_file_name(name)
        })
        .collect();
    let cleanup = |temps: &[PathBuf]| {
        for t in temps {
            let _ = fs::remove_file(t);
        }
    };
    for ((_, contents), tmp) in files.iter().zip(&temps) {
        if let Err(e) = fs::write(tmp, contents) {
            cleanup(&temps);
            return Err(e);
        }
    }
    for ((path, _), tmp) in files.iter().zip(&temps) {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&temps);
            return Err(e);
        }
    }
    Ok(())
}
