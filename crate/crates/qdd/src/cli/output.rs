//! CSV emission. Floats carry 17 significant digits so they round-trip.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub const LEDGER_HEADER: [&str; 7] = ["t", "entropy", "dissipation", "mass", "min_n", "h1_norm", "newton_iters"];
pub const FIELD_HEADER: [&str; 5] = ["t", "xi", "n", "A", "nu_plus"];
pub const MATRIX_DIAG_HEADER: [&str; 5] = ["t", "xi", "diag_R", "n_ref", "gap"];
pub const KERNEL_ERROR_HEADER: [&str; 5] = ["N", "t", "err_pointwise", "err_averaged", "fitted_order"];

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Table {
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}
