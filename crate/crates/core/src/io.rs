//! CSV persistence.
//!
//! Every number is written as `{:.16e}` (17 significant digits), which
//! round-trips an `f64` exactly. Complex values occupy two adjacent columns,
//! `<name>_re` and `<name>_im`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimation::Method;
use crate::experiment::{MonteCarloSummary, Stat, SweepSurface};
use crate::forward::BoundarySpectrum;
use crate::linalg::{c, CMat, CVec};
use crate::rom::RomSystem;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("{what}: `{s}` is not a number")))
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::Reader::from_reader(file))
}

fn finish(mut w: csv::Writer<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// A CSV table of numbers with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: vec![] }
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn complex_column(&self, name: &str) -> Result<Vec<Complex64>> {
        let re = self.column(&format!("{name}_re"))?;
        let im = self.column(&format!("{name}_im"))?;
        Ok(re.into_iter().zip(im).map(|(a, b)| c(a, b)).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
        }
        finish(w)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = open(path)?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let mut rows = vec![];
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| parse_f64(s, &format!("{} row {}", path.display(), i + 1)))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

fn complex_header(names: &[&str]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| [format!("{n}_re"), format!("{n}_im")])
        .collect()
}

pub const SPECTRUM_COLUMNS: [&str; 4] = ["f", "g", "fprime", "gprime"];

pub fn write_spectrum(path: &Path, spec: &BoundarySpectrum) -> Result<()> {
    let mut header = vec!["k".to_string()];
    header.extend(complex_header(&SPECTRUM_COLUMNS));
    let mut t = NumericTable::new(header);
    for i in 0..spec.len() {
        let mut row = vec![spec.wavenumbers[i]];
        for z in [spec.f[i], spec.g[i], spec.fprime[i], spec.gprime[i]] {
            row.extend([z.re, z.im]);
        }
        t.rows.push(row);
    }
    t.write(path)
}

/// Read a spectrum file. The derivative columns are required: without them
/// the diagonal ROM entries cannot be formed.
pub fn read_spectrum(path: &Path) -> Result<BoundarySpectrum> {
    let t = NumericTable::read(path)?;
    for name in ["fprime_re", "fprime_im", "gprime_re", "gprime_im"] {
        if !t.has_column(name) {
            return Err(Error::Invalid(format!(
                "{}: missing derivative column `{name}`; f' and g' are required for the ROM diagonal",
                path.display()
            )));
        }
    }
    BoundarySpectrum::new(
        t.column("k")?,
        t.complex_column("f")?,
        t.complex_column("g")?,
        t.complex_column("fprime")?,
        t.complex_column("gprime")?,
    )
}

/// Nodes in the first column `x`, then one complex column pair per field.
pub fn write_fields(path: &Path, x: &[f64], fields: &[(&str, &[Complex64])]) -> Result<()> {
    let names: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    let mut header = vec!["x".to_string()];
    header.extend(complex_header(&names));
    let mut t = NumericTable::new(header);
    for (n, &xn) in x.iter().enumerate() {
        let mut row = vec![xn];
        for (_, v) in fields {
            row.extend([v[n].re, v[n].im]);
        }
        t.rows.push(row);
    }
    t.write(path)
}

/// Nodes in the first column `x`, then one real column per profile.
pub fn write_profiles(path: &Path, x: &[f64], profiles: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["x".to_string()];
    header.extend(profiles.iter().map(|(n, _)| n.to_string()));
    let mut t = NumericTable::new(header);
    for (n, &xn) in x.iter().enumerate() {
        let mut row = vec![xn];
        row.extend(profiles.iter().map(|(_, v)| v[n]));
        t.rows.push(row);
    }
    t.write(path)
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "sigma",
    "method",
    "state_parameter",
    "alpha",
    "u_error_mean",
    "u_error_std",
    "q_error_mean",
    "q_error_std",
    "successes",
    "failures",
    "first_failure",
];

fn summary_record(s: &MonteCarloSummary) -> Vec<String> {
    vec![
        fmt_f64(s.sigma),
        s.method.to_string(),
        fmt_f64(s.state_parameter),
        fmt_f64(s.alpha),
        fmt_f64(s.state_error.mean),
        fmt_f64(s.state_error.std),
        fmt_f64(s.potential_error.mean),
        fmt_f64(s.potential_error.std),
        s.successes.to_string(),
        s.failures.to_string(),
        s.first_failure.clone().unwrap_or_default(),
    ]
}

fn parse_summary(rec: &csv::StringRecord, what: &str) -> Result<MonteCarloSummary> {
    if rec.len() != SUMMARY_HEADER.len() {
        return Err(Error::Invalid(format!("{what}: expected {} fields", SUMMARY_HEADER.len())));
    }
    let num = |j: usize| parse_f64(&rec[j], what);
    let count = |j: usize| {
        rec[j]
            .parse::<usize>()
            .map_err(|_| Error::Invalid(format!("{what}: bad count `{}`", &rec[j])))
    };
    Ok(MonteCarloSummary {
        sigma: num(0)?,
        method: rec[1].parse::<Method>()?,
        state_parameter: num(2)?,
        alpha: num(3)?,
        state_error: Stat {
            mean: num(4)?,
            std: num(5)?,
        },
        potential_error: Stat {
            mean: num(6)?,
            std: num(7)?,
        },
        successes: count(8)?,
        failures: count(9)?,
        first_failure: Some(rec[10].to_string()).filter(|s| !s.is_empty()),
    })
}

/// One row per (noise level, method) summary.
pub fn write_table1(path: &Path, rows: &[MonteCarloSummary]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in rows {
        w.write_record(summary_record(s))?;
    }
    finish(w)
}

pub fn read_table1(path: &Path) -> Result<Vec<MonteCarloSummary>> {
    let mut r = open(path)?;
    check_header(r.headers()?, &SUMMARY_HEADER, path)?;
    r.records()
        .enumerate()
        .map(|(i, rec)| parse_summary(&rec?, &format!("{} row {}", path.display(), i + 1)))
        .collect()
}

fn check_header(found: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Invalid(format!(
            "{}: unexpected header (expected {})",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

/// `sweep_<sigma>_<method>.csv`
pub fn sweep_file_name(sigma: f64, method: Method) -> String {
    format!("sweep_{sigma:e}_{method}.csv")
}

/// Surface cells in row-major order (`state_parameter` outer, `alpha` inner),
/// in the same layout as `table1.csv`.
pub fn write_sweep(path: &Path, surface: &SweepSurface) -> Result<()> {
    let rows: Vec<MonteCarloSummary> = surface.cells.iter().flatten().cloned().collect();
    write_table1(path, &rows)
}

pub fn read_sweep(path: &Path) -> Result<SweepSurface> {
    let rows = read_table1(path)?;
    let first = rows
        .first()
        .ok_or_else(|| Error::Invalid(format!("{}: empty sweep", path.display())))?;
    let (method, sigma) = (first.method, first.sigma);
    let mut axis2: Vec<f64> = vec![];
    for r in &rows {
        if axis2.iter().any(|a| a.to_bits() == r.alpha.to_bits()) {
            break;
        }
        axis2.push(r.alpha);
    }
    if rows.len() % axis2.len() != 0 {
        return Err(Error::Invalid(format!("{}: ragged sweep grid", path.display())));
    }
    let cells: Vec<Vec<MonteCarloSummary>> = rows.chunks(axis2.len()).map(|c| c.to_vec()).collect();
    let axis1 = cells.iter().map(|row| row[0].state_parameter).collect();
    Ok(SweepSurface {
        method,
        sigma,
        axis1,
        axis2,
        cells,
    })
}

/// Matrix rows of `S`, `M`, `B` followed by the vectors `f`, `g` and the
/// wavenumbers, one line each; every line is `block,row,re_0,im_0,...`.
pub fn write_rom(path: &Path, rom: &RomSystem) -> Result<()> {
    let m = rom.dim();
    let mut w = create(path)?;
    let mut header = vec!["block".to_string(), "row".to_string()];
    for j in 0..m {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    w.write_record(&header)?;
    let mut line = |block: &str, row: usize, vals: Vec<Complex64>| -> Result<()> {
        let mut rec = vec![block.to_string(), row.to_string()];
        for z in vals {
            rec.push(fmt_f64(z.re));
            rec.push(fmt_f64(z.im));
        }
        w.write_record(&rec)?;
        Ok(())
    };
    for (name, mat) in [("S", &rom.s), ("M", &rom.m), ("B", &rom.b)] {
        for i in 0..m {
            line(name, i, mat.row(i).iter().copied().collect())?;
        }
    }
    line("f", 0, rom.f.iter().copied().collect())?;
    line("g", 0, rom.g.iter().copied().collect())?;
    line("k", 0, rom.wavenumbers.iter().map(|&k| c(k, 0.0)).collect())?;
    drop(line);
    finish(w)
}

pub fn read_rom(path: &Path) -> Result<RomSystem> {
    let mut r = open(path)?;
    let ncols = r.headers()?.len();
    if ncols < 4 || ncols % 2 != 0 {
        return Err(Error::Invalid(format!("{}: bad ROM header", path.display())));
    }
    let m = (ncols - 2) / 2;
    let mut s = CMat::zeros(m, m);
    let mut mm = CMat::zeros(m, m);
    let mut b = CMat::zeros(m, m);
    let mut f = None;
    let mut g = None;
    let mut k = None;
    let mut seen = 0usize;
    for rec in r.records() {
        let rec = rec?;
        let what = format!("{} block {}", path.display(), &rec[0]);
        let row: usize = rec[1]
            .parse()
            .map_err(|_| Error::Invalid(format!("{what}: bad row index")))?;
        let vals = (0..m)
            .map(|j| Ok(c(parse_f64(&rec[2 + 2 * j], &what)?, parse_f64(&rec[3 + 2 * j], &what)?)))
            .collect::<Result<Vec<Complex64>>>()?;
        let target = match &rec[0] {
            "S" => &mut s,
            "M" => &mut mm,
            "B" => &mut b,
            "f" => {
                f = Some(CVec::from_vec(vals));
                continue;
            }
            "g" => {
                g = Some(CVec::from_vec(vals));
                continue;
            }
            "k" => {
                k = Some(vals.iter().map(|z| z.re).collect::<Vec<f64>>());
                continue;
            }
            other => return Err(Error::Invalid(format!("{}: unknown block `{other}`", path.display()))),
        };
        if row >= m {
            return Err(Error::Invalid(format!("{what}: row {row} out of range")));
        }
        for (j, z) in vals.into_iter().enumerate() {
            target[(row, j)] = z;
        }
        seen += 1;
    }
    let missing = |name: &str| Error::Invalid(format!("{}: missing `{name}`", path.display()));
    if seen != 3 * m {
        return Err(missing("matrix rows"));
    }
    Ok(RomSystem {
        s,
        m: mm,
        b,
        f: f.ok_or_else(|| missing("f"))?,
        g: g.ok_or_else(|| missing("g"))?,
        wavenumbers: k.ok_or_else(|| missing("k"))?,
    })
}

/// Write raw text (used for reports).
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
