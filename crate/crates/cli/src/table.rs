//! CSV output with a fixed header per command.

use std::io::Write;

use smmv::Result;

/// Floats carry 17 significant digits.
pub fn num(x: f64) -> String {
    // adding zero folds −0 into 0
    format!("{:.16e}", x + 0.0)
}

pub struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| smmv::Error::Io(std::io::Error::other(e));
        w.write_record(self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows of (object, quantity, index, value, definition).
pub struct Report(Table);

impl Report {
    pub const HEADER: &'static [&'static str] =
        &["object", "quantity", "index", "value", "definition"];

    pub fn new() -> Self {
        Report(Table::new(Self::HEADER))
    }

    pub fn text(
        &mut self,
        object: &str,
        quantity: &str,
        index: &str,
        value: impl Into<String>,
        def: &str,
    ) {
        self.0.push(vec![
            object.into(),
            quantity.into(),
            index.into(),
            value.into(),
            def.into(),
        ]);
    }

    pub fn num(&mut self, object: &str, quantity: &str, value: f64, def: &str) {
        self.text(object, quantity, "", num(value), def);
    }

    pub fn flag(&mut self, object: &str, quantity: &str, value: bool, def: &str) {
        self.text(object, quantity, "", value.to_string(), def);
    }

    pub fn series(&mut self, object: &str, quantity: &str, values: &[f64], def: &str) {
        for (k, v) in values.iter().enumerate() {
            self.text(object, quantity, &k.to_string(), num(*v), def);
        }
    }

    pub fn into_table(self) -> Table {
        self.0
    }
}
