//! Line-oriented input parsing: one value per line (individual variants) or
//! `m` comma-separated values per line (batched variants). A non-numeric
//! first line is treated as a header and skipped; any later parse failure
//! names its line number.

use std::io::BufRead;

use crate::commands::CliError;

pub struct RowReader<R: BufRead> {
    input: R,
    width: usize,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> RowReader<R> {
    pub fn new(input: R, width: usize) -> Self {
        RowReader {
            input,
            width,
            line_no: 0,
            buf: String::new(),
        }
    }

    fn parse_row(&self, line: &str) -> Result<Vec<f64>, String> {
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if tokens.len() != self.width {
            return Err(format!(
                "expected {} value(s), got {}",
                self.width,
                tokens.len()
            ));
        }
        let mut row = Vec::with_capacity(self.width);
        for t in tokens {
            let v: f64 = t.parse().map_err(|_| format!("cannot parse `{t}`"))?;
            if !v.is_finite() {
                return Err(format!("non-finite value `{t}`"));
            }
            row.push(v);
        }
        Ok(row)
    }
}

impl<R: BufRead> Iterator for RowReader<R> {
    type Item = Result<Vec<f64>, CliError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(CliError::Data(format!("read failed: {e}")))),
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            match self.parse_row(line) {
                Ok(row) => return Some(Ok(row)),
                Err(msg) => {
                    // a non-numeric first line is an optional header
                    if self.line_no == 1 {
                        continue;
                    }
                    return Some(Err(CliError::Data(format!("line {}: {msg}", self.line_no))));
                }
            }
        }
    }
}
