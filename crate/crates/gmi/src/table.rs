use std::io::Write;

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

/// Shortest representation that parses back to the same f64, with an
/// exponent for very small or large magnitudes.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

/// Integral counts stored as f64: plain digits while exact, scientific beyond.
pub fn fmt_count(x: f64) -> String {
    if x < 9.007_199_254_740_992e15 {
        format!("{x:.0}")
    } else {
        format!("{x:e}")
    }
}
